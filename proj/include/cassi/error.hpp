#pragma once

#include <stdexcept>
#include <string>

namespace cassi {

// Every recoverable failure (bad file, shape mismatch, invalid argument)
// surfaces as cassi::Error. The CLI turns these into a message on stderr
// and a nonzero exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace cassi
