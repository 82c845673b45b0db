#include "manifest.hpp"

#include "copydetect/dataio.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#ifndef COPYDETECT_VERSION
#define COPYDETECT_VERSION "unknown"
#endif

namespace copydetect::cli {

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return hex64(h);
}

RunManifest::RunManifest(std::filesystem::path path, std::string command, const std::vector<std::string>& argv)
    : path_(std::move(path)) {
    doc_ = {{"tool", "copydetect"},
            {"version", COPYDETECT_VERSION},
            {"command", std::move(command)},
            {"argv", argv},
            {"flags", nlohmann::json::object()},
            {"inputs", nlohmann::json::array()},
            {"outputs", nlohmann::json::array()},
            {"status", "incomplete"}};
}

void RunManifest::set_seed(std::uint64_t seed) { doc_["seed"] = seed; }

void RunManifest::add_input(const std::string& role, const std::filesystem::path& file) {
    doc_["inputs"].push_back({{"role", role}, {"path", file.string()}, {"fnv1a", file_fingerprint(file)}});
}

void RunManifest::add_exam(const std::string& fingerprint_hex) { doc_["exam_fingerprint"] = fingerprint_hex; }

void RunManifest::add_output(const std::string& role, const std::filesystem::path& file) {
    doc_["outputs"].push_back({{"role", role}, {"path", file.string()}});
}

void RunManifest::start() {
    doc_["started"] = utc_now();
    flush();
}

void RunManifest::complete() {
    for (auto& out : doc_["outputs"])
        out["fnv1a"] = file_fingerprint(out["path"].get<std::string>());
    doc_["status"] = "complete";
    doc_["finished"] = utc_now();
    flush();
}

void RunManifest::fail(const std::string& message) {
    doc_["status"] = "failed";
    doc_["error"] = message;
    doc_["finished"] = utc_now();
    flush();
}

void RunManifest::flush() const {
    if (path_.empty())
        return;
    if (path_.has_parent_path())
        std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_);
    if (!out)
        throw FormatError("cannot write manifest " + path_.string());
    out << doc_.dump(2) << '\n';
}

StagedFile::StagedFile(std::filesystem::path target)
    : target_(std::move(target)), partial_(target_.string() + ".partial") {
    if (target_.has_parent_path())
        std::filesystem::create_directories(target_.parent_path());
    out_.open(partial_);
    if (!out_)
        throw FormatError("cannot write " + target_.string());
}

StagedFile::~StagedFile() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(partial_, ec);
    }
}

void StagedFile::commit() {
    out_.close();
    if (!out_)
        throw FormatError("failed writing " + target_.string());
    std::filesystem::rename(partial_, target_);
    committed_ = true;
}

} // namespace copydetect::cli
