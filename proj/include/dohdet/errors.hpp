#pragma once

#include <stdexcept>
#include <string>

namespace dohdet {

/// Bad user-supplied input: missing files, malformed CSV/config content,
/// invalid option values. The CLI maps this to exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dohdet
