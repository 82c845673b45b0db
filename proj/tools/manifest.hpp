#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace copydetect::cli {

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

/// JSON record written next to every output. It is rewritten on each state
/// change so that an interrupted run leaves status "incomplete" behind.
class RunManifest {
  public:
    RunManifest(std::filesystem::path path, std::string command, const std::vector<std::string>& argv);

    nlohmann::json& flags() { return doc_["flags"]; }
    void set_seed(std::uint64_t seed);
    void add_input(const std::string& role, const std::filesystem::path& file);
    void add_exam(const std::string& fingerprint_hex);
    void add_output(const std::string& role, const std::filesystem::path& file);

    void start();
    void complete();
    void fail(const std::string& message);

  private:
    void flush() const;

    std::filesystem::path path_;
    nlohmann::json doc_;
};

/// Output file that only appears under its final name once commit() runs.
class StagedFile {
  public:
    explicit StagedFile(std::filesystem::path target);
    ~StagedFile();
    StagedFile(const StagedFile&) = delete;
    StagedFile& operator=(const StagedFile&) = delete;

    std::ostream& stream() { return out_; }
    void commit();

  private:
    std::filesystem::path target_;
    std::filesystem::path partial_;
    std::ofstream out_;
    bool committed_ = false;
};

} // namespace copydetect::cli
