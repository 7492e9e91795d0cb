#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace autolabel {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes or sizes that do not fit the operation (bad batch, empty set).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Bad configuration value or combination. The CLI maps this to exit code 2.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

// Soft label off the probability simplex.
class InvalidLabel : public Error {
public:
    using Error::Error;
};

// Bucket not present in a label table.
class InvalidBucket : public Error {
public:
    using Error::Error;
};

// Non-finite loss or gradient. The CLI maps this to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Malformed dataset or checkpoint file.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace autolabel
