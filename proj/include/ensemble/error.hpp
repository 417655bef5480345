#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ensemble {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed specification (bad pilot shape, bad hook parameters, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Transition requested on a task the state machine does not know, or
/// a task that already reached a terminal state.
class StateMachineError : public Error {
public:
    using Error::Error;
};

/// Transition requested out of order (completing a pending task,
/// resizing a stage that already started).
class OrderingError : public Error {
public:
    using Error::Error;
};

/// The host cannot back the requested local pilot.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// A task can never fit on the pilot, even when every slot is free.
class UnsatisfiableError : public Error {
public:
    using Error::Error;
};

/// Slot bookkeeping misuse (double release, unknown placement).
class StateError : public Error {
public:
    using Error::Error;
};

class DispatchError : public Error {
public:
    using Error::Error;
};

/// Illegal transition presented to a trace sink.
class TraceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unparseable input file; carries the 1-based line number when known.
class InputError : public Error {
public:
    InputError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace ensemble
