#pragma once

#include <stdexcept>
#include <string>

namespace hoi {

// Error taxonomy shared across the library. Each maps to a distinct failure
// mode so callers (and the CLI exit-code policy) can tell them apart.

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error("schema error: " + msg) {}
};

struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& msg) : std::runtime_error("integrity error: " + msg) {}
};

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct NonFiniteError : std::runtime_error {
    explicit NonFiniteError(const std::string& msg) : std::runtime_error("non-finite value: " + msg) {}
};

struct NoFeasibleMatching : std::runtime_error {
    explicit NoFeasibleMatching(const std::string& msg) : std::runtime_error("no feasible matching: " + msg) {}
};

struct UnknownClass : std::runtime_error {
    explicit UnknownClass(const std::string& msg) : std::runtime_error("unknown class: " + msg) {}
};

struct NoPositiveLabel : std::runtime_error {
    explicit NoPositiveLabel(const std::string& msg) : std::runtime_error("no positive label: " + msg) {}
};

struct CheckpointMismatch : std::runtime_error {
    explicit CheckpointMismatch(const std::string& msg) : std::runtime_error("checkpoint mismatch: " + msg) {}
};

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hoi
