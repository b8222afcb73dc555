#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmdmiss {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: bad files, bad flags, bad config. The CLI maps these to exit 2.
class InputError : public Error {
public:
    using Error::Error;
};

class FormatError : public InputError {
public:
    FormatError(std::size_t row, const std::string& what)
        : InputError("format error at row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t row, std::size_t col, const std::string& cell)
        : InputError("cannot parse cell at row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": '" + cell + "'"),
          row_(row), col_(col) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class EmptyInput : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

// Well-formed input that violates a method precondition. The CLI maps these to exit 3.
class PreconditionError : public Error {
public:
    using Error::Error;
};

#define MMDMISS_PRECONDITION_ERROR(Name)        \
    class Name : public PreconditionError {      \
    public:                                      \
        using PreconditionError::PreconditionError; \
    };

MMDMISS_PRECONDITION_ERROR(DimError)
MMDMISS_PRECONDITION_ERROR(SampleSizeError)
MMDMISS_PRECONDITION_ERROR(InsufficientCompleteRows)
MMDMISS_PRECONDITION_ERROR(DegenerateScale)
MMDMISS_PRECONDITION_ERROR(EmptySpec)
MMDMISS_PRECONDITION_ERROR(NoCompleteRows)
MMDMISS_PRECONDITION_ERROR(GridTooLarge)
MMDMISS_PRECONDITION_ERROR(DegenerateVariance)
MMDMISS_PRECONDITION_ERROR(ImputeError)
MMDMISS_PRECONDITION_ERROR(MissingDataError)

#undef MMDMISS_PRECONDITION_ERROR

}  // namespace mmdmiss
