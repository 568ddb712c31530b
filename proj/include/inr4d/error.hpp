#pragma once

#include <stdexcept>
#include <string>

namespace inr4d {

/// Every failure raised by the library. The message starts with a short
/// category ("not NIfTI-1", "divergence", ...) followed by detail.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) throw Error(what);
}

} // namespace inr4d
