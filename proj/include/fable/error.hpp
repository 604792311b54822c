#pragma once

#include <exception>
#include <stdexcept>
#include <string>

namespace fable {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed records, broken invariants, invalid configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A backend call failed. `retryable()` distinguishes transport/5xx-class
/// failures from responses that will never succeed on a retry.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& what, bool retryable = false)
        : Error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// Connection-level failure (refused, reset, timed out).
class TransportError : public BackendError {
public:
    explicit TransportError(const std::string& what) : BackendError(what, true) {}
};

/// The service answered but produced no text.
class EmptyCompletionError : public BackendError {
public:
    EmptyCompletionError() : BackendError("empty completion", false) {}
};

/// A stage stopped part-way; completed per-document outputs were written.
class PartialCompletion : public Error {
public:
    using Error::Error;
};

/// what() of a captured exception.
inline std::string describe_exception(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

inline bool is_backend_error(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const BackendError&) {
        return true;
    } catch (...) {
        return false;
    }
}

}  // namespace fable
