#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "lexbias/lexbias.hpp"

namespace lexbias::testing {

/// Single-segment dataset from (text, label) pairs.
inline Dataset make_dataset(const std::vector<std::pair<std::string, std::string>>& rows,
                            std::vector<std::string> labels = {}) {
    std::vector<Record> recs;
    for (const auto& [text, label] : rows) recs.push_back({{text}, label});
    return Dataset::from_records(recs, LabelVocab(std::move(labels)));
}

/// Feature "f" in instances 0,1,2 with labels A,A,B; instance 3 has no
/// features and label B.
inline Dataset toy4() { return make_dataset({{"f", "A"}, {"f", "A"}, {"f", "B"}, {"", "B"}}); }

/// Pool of M members: the first n_U are in U only, the rest in N only; c_U
/// correct flags in U and K - c_U in N.
inline PooledEval pooled(std::size_t M, std::size_t n_U, std::size_t K, std::size_t c_U) {
    PooledEval pe;
    const std::size_t c_N = K - c_U;
    for (std::size_t i = 0; i < M; ++i) {
        const bool u = i < n_U;
        const bool ok = u ? i < c_U : (i - n_U) < c_N;
        pe.add(static_cast<InstanceId>(i), u, !u, ok);
    }
    return pe;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("lexbias_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

    std::string write(const std::string& name, const std::string& content) const {
        std::ofstream out(file(name), std::ios::binary);
        out << content;
        return file(name);
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace lexbias::testing
