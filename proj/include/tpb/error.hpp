#pragma once

#include <stdexcept>
#include <string>

namespace tpb {

// Malformed or unusable input data (files, traces, feature tables).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Experiment configuration that cannot be loaded; message carries the field path or line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A feature series too short for the requested smoothing window.
class SeriesTooShort : public DataError {
public:
    SeriesTooShort(std::size_t length, std::size_t window)
        : DataError("series of length " + std::to_string(length) +
                    " is shorter than smoothing window " + std::to_string(window) +
                    "; reduce the window length or skip this configuration"),
          length_(length), window_(window) {}

    std::size_t length() const noexcept { return length_; }
    std::size_t window() const noexcept { return window_; }

private:
    std::size_t length_;
    std::size_t window_;
};

}  // namespace tpb
