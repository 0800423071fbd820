#pragma once

#include "codebpc/document.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace testing {

/// `n` whitespace-separated identifier tokens.
inline std::string words(std::size_t n, const std::string& word = "tok") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += word;
    }
    return s;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t len, const std::string& alphabet) {
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("codebpc_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
