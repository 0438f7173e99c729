#pragma once

#include <stdexcept>
#include <string>

namespace reapsnap {

// Why a trace / working-set / image artifact was rejected. Each reader check
// maps to exactly one issue so tests (and callers) can tell them apart.
enum class FormatIssue {
    BadMagic,
    BadVersion,
    BadReserved,
    BadPageSize,
    MisalignedOffset,
    DuplicateOffset,
    OffsetOutOfRange,
    Truncated,
    TrailingBytes,
    BadField,
    IoError,
};

inline const char* format_issue_name(FormatIssue issue) {
    switch (issue) {
        case FormatIssue::BadMagic: return "bad magic";
        case FormatIssue::BadVersion: return "version mismatch";
        case FormatIssue::BadReserved: return "nonzero reserved field";
        case FormatIssue::BadPageSize: return "invalid page size";
        case FormatIssue::MisalignedOffset: return "non-page-aligned offset";
        case FormatIssue::DuplicateOffset: return "duplicate offset";
        case FormatIssue::OffsetOutOfRange: return "offset out of range";
        case FormatIssue::Truncated: return "truncated file";
        case FormatIssue::TrailingBytes: return "trailing bytes";
        case FormatIssue::BadField: return "bad field";
        case FormatIssue::IoError: return "i/o error";
    }
    return "unknown";
}

class FormatError : public std::runtime_error {
public:
    FormatError(FormatIssue issue, const std::string& detail)
        : std::runtime_error(std::string(format_issue_name(issue)) + ": " + detail),
          issue_(issue) {}

    FormatIssue issue() const { return issue_; }

private:
    FormatIssue issue_;
};

}  // namespace reapsnap
