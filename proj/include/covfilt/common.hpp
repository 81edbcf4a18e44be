#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace covfilt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

// Largest |A - A^T| entry relative to the largest |A| entry.
inline double relative_asymmetry(const Mat& a) {
    double scale = a.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Verbosity comes from COVFILT_LOG (error|info|debug); default error.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("COVFILT_LOG");
        if (env == nullptr) return LogLevel::error;
        std::string v(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "info") return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    const char* tag = level == LogLevel::error ? "error" : level == LogLevel::info ? "info" : "debug";
    std::cerr << "[covfilt:" << tag << "] " << msg << "\n";
}

inline void log_info(const std::string& msg) { log_msg(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::debug, msg); }

inline std::string shape_str(const Mat& a) {
    std::ostringstream os;
    os << a.rows() << "x" << a.cols();
    return os.str();
}

}  // namespace covfilt
