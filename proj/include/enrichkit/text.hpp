#pragma once

#include <string>
#include <string_view>

namespace enrichkit {

// Plain text of an HTML/XML document: tags removed, script/style/noscript
// bodies dropped, entities decoded, block elements on their own lines.
std::string html_to_text(std::string_view html);

// True when the body should go through html_to_text rather than be returned as-is.
bool looks_like_markup(std::string_view body, std::string_view content_type = {});

// Short interstitials served to crawlers ("enable JavaScript", captcha walls).
bool looks_bot_blocked(std::string_view extracted_text);

std::string decode_entities(std::string_view text);

} // namespace enrichkit
