#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "asnet/matrix.hpp"

namespace asnet {

// Worker count for the bounded pool: hardware concurrency, capped by the
// ASNET_THREADS environment variable when set.
inline std::size_t worker_count() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ASNET_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && v >= 1) n = std::min<std::size_t>(n, v);
    }
    return std::min<std::size_t>(n, 64);
}

// Runs fn(i) for i in [0, n) on a bounded pool. Each index is independent and
// writes only its own output slot, so results do not depend on scheduling.
// The first worker exception is rethrown on the calling thread.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += workers) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

// temp-and-rename write so readers never observe a partial file
inline void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8-bit binary PGM with each row scaled by its own maximum
inline void write_pgm_row_normalized(const std::string& path, const Matrix& m) {
    std::string out = "P5\n" + std::to_string(m.cols) + " " + std::to_string(m.rows) + "\n255\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row(i);
        double mx = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) mx = std::max(mx, row[j]);
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double v = mx > 0.0 ? std::clamp(row[j] / mx, 0.0, 1.0) : 0.0;
            out.push_back(static_cast<char>(static_cast<unsigned char>(v * 255.0 + 0.5)));
        }
    }
    write_file_atomic(path, out);
}

}  // namespace asnet
