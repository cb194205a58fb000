#include "sia/fsutil.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>

#include "sia/errors.hpp"
#include "sia/seeds.hpp"

namespace sia {

void atomic_write_text(const std::filesystem::path& file, const std::string& content) {
    std::filesystem::create_directories(file.parent_path());
    std::filesystem::path tmp = file;
    tmp += ".tmp~";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ValidationError("cannot write: " + tmp.string());
        out << content;
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

void atomic_write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    atomic_write_text(file, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(file.string() + ": " + e.what());
    }
    return j;
}

DirLock::DirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    lock_file_ = dir / ".lock";
    int fd = ::open(lock_file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw InternalError("output directory is locked by another command: " + dir.string() +
                            " (remove " + lock_file_.string() + " if that command crashed)");
    }
    ::close(fd);
    held_ = true;
}

DirLock::~DirLock() {
    if (held_) {
        std::error_code ec;
        std::filesystem::remove(lock_file_, ec);
    }
}

std::string file_fingerprint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ValidationError("cannot fingerprint: " + file.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string combine_fingerprints(const std::vector<std::string>& parts) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : parts) h = fnv1a64(p, h);
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

bool stage_up_to_date(const std::filesystem::path& sidecar, const std::string& fingerprint) {
    if (!std::filesystem::exists(sidecar)) return false;
    try {
        return read_json(sidecar).value("fingerprint", "") == fingerprint;
    } catch (const ValidationError&) {
        return false;
    }
}

void write_stage_sidecar(const std::filesystem::path& sidecar, const std::string& fingerprint) {
    atomic_write_json(sidecar, {{"fingerprint", fingerprint}});
}

}  // namespace sia
