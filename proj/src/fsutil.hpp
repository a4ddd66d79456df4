#pragma once

#include <filesystem>
#include <string>
#include <system_error>

namespace svarefine::detail {

// Best effort; the following open reports the real failure.
inline void create_parent(std::string const & path)
{
    auto const parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
}

} // namespace svarefine::detail
