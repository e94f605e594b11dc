#include "granur/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "granur/error.hpp"
#include "granur/text.hpp"

namespace granur::io {

namespace fs = std::filesystem;

namespace {

fs::path temp_sibling(const fs::path& path) {
    return path.parent_path() / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    const fs::path tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot rename into " + path.string());
    }
}

void for_each_line(const fs::path& path, const std::function<void(std::string_view, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        fn(line, number);
    }
}

void replace_directory_atomic(const fs::path& dir, const std::function<void(const fs::path&)>& fill) {
    std::error_code ec;
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path(), ec);
    const fs::path tmp = temp_sibling(dir);
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + tmp.string());
    try {
        fill(tmp);
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }
    const fs::path old = dir.parent_path() / (dir.filename().string() + ".old." + std::to_string(::getpid()));
    const bool existed = fs::exists(dir);
    if (existed) {
        fs::rename(dir, old, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot move aside " + dir.string());
    }
    fs::rename(tmp, dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename into " + dir.string());
    if (existed) fs::remove_all(old, ec);
}

}  // namespace granur::io
