#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace codebpc {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Failure classes; each maps to a distinct process exit code.
enum class ErrorKind { config, input, compute, output };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return {ErrorKind::config, msg}; }
inline Error input_error(const std::string& msg) { return {ErrorKind::input, msg}; }
inline Error compute_error(const std::string& msg) { return {ErrorKind::compute, msg}; }
inline Error output_error(const std::string& msg) { return {ErrorKind::output, msg}; }

int exit_code(ErrorKind kind) noexcept;

/// Neumaier-compensated running sum. Order of add() calls defines the result.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Worker count: CODEBPC_WORKERS if set and positive, else hardware concurrency.
std::size_t default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs exactly once;
/// the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace codebpc
