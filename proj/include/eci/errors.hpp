#pragma once

#include <stdexcept>
#include <string>

namespace eci {

// Error categories map one-to-one onto CLI exit codes (usage 2, data 3,
// numeric 4). Anything thrown from the library derives from eci::error.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class usage_error : public error {
public:
    using error::error;
};

// Malformed input: mismatched domains, bad file contents, invalid parameters.
class data_error : public error {
public:
    using error::error;
};

class domain_mismatch : public data_error {
public:
    using data_error::data_error;
};

class corrupt_file : public data_error {
public:
    using data_error::data_error;
};

class version_mismatch : public data_error {
public:
    using data_error::data_error;
};

// NaN/Inf, failed factorization, divergence.
class numeric_error : public error {
public:
    using error::error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw data_error(what);
}

} // namespace eci
