#include "fundreg/core.hpp"

#include <charconv>

namespace fundreg {

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::DegeneratePointSet: return "DegeneratePointSet";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InconsistentShapes: return "InconsistentShapes";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorCode::LeakageDetected: return "LeakageDetected";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedGroundTruth: return "MalformedGroundTruth";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string_view to_string(Category c) {
    switch (c) {
    case Category::A: return "A";
    case Category::P: return "P";
    case Category::S: return "S";
    case Category::Synthetic: return "Synthetic";
    }
    return "Synthetic";
}

Category category_from_string(std::string_view s) {
    if (s == "A") return Category::A;
    if (s == "P") return Category::P;
    if (s == "S") return Category::S;
    if (s == "Synthetic") return Category::Synthetic;
    throw Error(ErrorCode::UnknownCategory, std::string(s));
}

void check_pair(const ImagePair& pair) {
    if (pair.source_landmarks.cols() != pair.target_landmarks.cols()) {
        throw Error(ErrorCode::CountMismatch,
                    "pair '" + pair.id + "': " + std::to_string(pair.source_landmarks.cols()) +
                        " source vs " + std::to_string(pair.target_landmarks.cols()) +
                        " target landmarks");
    }
}

} // namespace fundreg
