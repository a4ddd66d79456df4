#pragma once

#include <string_view>

namespace svarefine::agents::detail {

// Defined in a file generated at configure time from templates/*.txt.
// Returns an empty view for unknown role names.
std::string_view builtin_template_text(std::string_view role_name);

} // namespace svarefine::agents::detail
