#pragma once

#include "enrichkit/gateway.hpp"

#include <cstdint>
#include <memory>

namespace enrichkit {

// Offline stand-in for a chat endpoint. Replies are a pure function of the
// request and the seed, follow each stage's reply grammar, and are built from
// the text of the prompt (keywords, headings, the original answer). Used for
// demos, smoke runs and priming replay caches; it has no domain knowledge.
std::shared_ptr<ChatModel> make_simulated_model(std::uint64_t seed = 0);

} // namespace enrichkit
