#pragma once

#include <stdexcept>
#include <string>

namespace foregan {

// Shape or geometry violation; the message names the offending shapes.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A call-contract violation (empty input, non-scalar loss, detached graph, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or unwritable file; the message names the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally invalid file content (bad magic, unsupported version, ...).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace foregan
