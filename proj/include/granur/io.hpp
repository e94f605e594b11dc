#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace granur::io {

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls fn(line, 1-based line number) for every non-blank line.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

/// Replaces a directory atomically: builds into a temp sibling via fill, then
/// swaps it into place.
void replace_directory_atomic(const std::filesystem::path& dir,
                              const std::function<void(const std::filesystem::path&)>& fill);

}  // namespace granur::io
