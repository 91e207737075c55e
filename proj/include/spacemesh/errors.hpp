#pragma once

#include <stdexcept>
#include <string>

namespace spacemesh {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// mesh construction
struct NonManifoldEdge : Error { using Error::Error; };
struct OpenBoundary : Error { using Error::Error; };
struct DegenerateFace : Error { using Error::Error; };

// numerics
struct DimensionMismatch : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct InconsistentSigma : Error { using Error::Error; };
struct GraphMismatch : Error { using Error::Error; };

// metrics
struct ZeroArea : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };

// io
struct ParseError : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };

} // namespace spacemesh
