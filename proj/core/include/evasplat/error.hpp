#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace evasplat {

/// Runtime error carrying a stable machine-readable code alongside the
/// human-readable message. Codes are what the CLI reports on stderr and
/// what tests match against.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

namespace errc {
// camera
inline constexpr const char* kPointBehindCamera = "PointBehindCamera";
inline constexpr const char* kNonPositiveDepth = "NonPositiveDepth";
inline constexpr const char* kDimensionMismatch = "DimensionMismatch";
// gaussian model
inline constexpr const char* kZeroQuaternion = "ZeroQuaternion";
inline constexpr const char* kBehindCamera = "BehindCamera";
inline constexpr const char* kInvalidGaussianSet = "InvalidGaussianSet";
// rasterizer
inline constexpr const char* kImageTooLarge = "ImageTooLarge";
inline constexpr const char* kTooManyGaussiansForOracle = "TooManyGaussiansForOracle";
inline constexpr const char* kEmptyInput = "EmptyInput";
// attention
inline constexpr const char* kWindowWiderThanImage = "WindowWiderThanImage";
inline constexpr const char* kShapeMismatch = "ShapeMismatch";
inline constexpr const char* kFewerThanTwoViews = "FewerThanTwoViews";
inline constexpr const char* kOutOfMemoryBudget = "OutOfMemoryBudget";
// losses
inline constexpr const char* kEmptyMask = "EmptyMask";
inline constexpr const char* kNonFiniteComponent = "NonFiniteComponent";
// pipeline
inline constexpr const char* kInvalidRing = "InvalidRing";
inline constexpr const char* kMaskMismatch = "MaskMismatch";
inline constexpr const char* kDivergenceDetected = "DivergenceDetected";
// io / cli
inline constexpr const char* kBundleNotFound = "BundleNotFound";
inline constexpr const char* kIoFailure = "IoFailure";
inline constexpr const char* kBadConfig = "BadConfig";
}  // namespace errc

}  // namespace evasplat
