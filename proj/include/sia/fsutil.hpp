#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace sia {

// Writes to "<file>.tmp~" then renames, so readers never observe a partial
// artifact.
void atomic_write_text(const std::filesystem::path& file, const std::string& content);
void atomic_write_json(const std::filesystem::path& file, const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& file);

// Exclusive advisory lock on an output directory. Throws InternalError when
// another command already holds it; released on destruction.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path lock_file_;
    bool held_ = false;
};

// Content fingerprint over a file's bytes, hex-encoded.
std::string file_fingerprint(const std::filesystem::path& file);
std::string combine_fingerprints(const std::vector<std::string>& parts);

// Stage skip logic: a stage is up to date when its sidecar exists and records
// the same fingerprint.
bool stage_up_to_date(const std::filesystem::path& sidecar, const std::string& fingerprint);
void write_stage_sidecar(const std::filesystem::path& sidecar, const std::string& fingerprint);

}  // namespace sia
