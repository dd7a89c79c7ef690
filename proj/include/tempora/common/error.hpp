#pragma once

#include <stdexcept>
#include <string>

namespace tempora {

// Failure classes surfaced by the pipeline. The CLI maps each kind onto a
// stable process exit code.
enum class ErrorKind {
    Input = 2,              // malformed input data, schema or config
    TrainingAbort = 3,      // non-finite loss or gradient during training
    ArtifactMismatch = 4,   // checkpoint / panel / config disagree
    ComparisonMismatch = 5, // forecast sets cannot be compared
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error input_error(const std::string& what) { return {ErrorKind::Input, what}; }
inline Error training_abort(const std::string& what) { return {ErrorKind::TrainingAbort, what}; }
inline Error artifact_mismatch(const std::string& what) { return {ErrorKind::ArtifactMismatch, what}; }
inline Error comparison_mismatch(const std::string& what) { return {ErrorKind::ComparisonMismatch, what}; }

} // namespace tempora
