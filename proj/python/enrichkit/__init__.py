"""Python interface to the enrichkit instruction-enrichment toolkit."""

import json

from . import _core
from ._core import EnrichkitError

__all__ = [
    "EnrichkitError",
    "Session",
    "aggregate_quality",
    "combine_readability",
    "evaluate",
    "extract_answer",
    "fast_subset",
    "grounded_outcome",
    "taxonomy_agreement",
]


def _settings_text(settings):
    if not settings:
        return ""
    return "".join(f"{k} = {v}\n" for k, v in settings.items())


class Session:
    """A configured runtime: gateway, registry, pipeline settings and the workbench API.

    ``settings`` maps config keys to values, e.g. ``{"model.seed": 7}``.
    """

    def __init__(self, settings=None, config_text="", overrides=()):
        text = config_text + _settings_text(settings)
        self._core = _core.Session(text, list(overrides))

    @property
    def config(self):
        return json.loads(self._core.config())

    def enrich(self, records, workers=0):
        """Enrich records; quarantined ones come back as ``{"id", "error"}``."""
        return json.loads(self._core.enrich(json.dumps(list(records)), workers))

    def judge(self, inputs, workers=0):
        return json.loads(self._core.judge(json.dumps(list(inputs)), workers))

    def load_records(self, records):
        self._core.load_records(json.dumps(list(records)))

    def request(self, method, path, body=None, query=None):
        """Call a workbench endpoint; returns ``(status, payload)``."""
        text = "" if body is None else json.dumps(body)
        status, reply = self._core.handle(method, path, text, dict(query or {}))
        return status, json.loads(reply)


def combine_readability(order1, order2, strict=False):
    return _core.combine_readability(order1, order2, strict)


def grounded_outcome(order1, order2, strict=False):
    return json.loads(_core.grounded_outcome(order1, order2, strict))


def aggregate_quality(verdicts):
    return json.loads(_core.aggregate_quality(json.dumps(list(verdicts))))


def extract_answer(completion, kind):
    answer = _core.extract_answer(completion, kind)
    return None if answer is None else set(answer)


def evaluate(items, oracle, seed=0):
    return json.loads(_core.evaluate(json.dumps(list(items)), oracle, seed))


def taxonomy_agreement(items):
    return json.loads(_core.taxonomy_agreement(json.dumps(list(items))))


def fast_subset(records, scores, plan=None):
    return json.loads(_core.fast_subset(json.dumps(list(records)), json.dumps(scores), json.dumps(plan or {})))
