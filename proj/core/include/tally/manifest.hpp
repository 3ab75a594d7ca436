#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tally/types.hpp"

namespace tally {

// Tab-separated manifest, three columns: subject_id, locations, metadata.
// locations is a semicolon-joined list of references; metadata is one
// compact JSON object. Lines starting with '#' are comments. The first
// data line must be the header row naming the three columns.

struct ManifestError : std::runtime_error {
  ManifestError(std::string message, std::size_t row_number)
      : std::runtime_error(std::move(message)), row(row_number) {}
  std::size_t row;  // 1-based physical line number, 0 when not line-bound
};

struct MissingColumn : ManifestError {
  using ManifestError::ManifestError;
};
struct DuplicateSubjectId : ManifestError {
  DuplicateSubjectId(const SubjectId& id, std::size_t first_row,
                     std::size_t second_row);
  SubjectId subject_id;
  std::size_t first_row;
};
struct MalformedMetadata : ManifestError {
  using ManifestError::ManifestError;
};

std::vector<Subject> load_manifest(std::istream& in);
std::vector<Subject> load_manifest_file(const std::string& path);

// Inverse of load_manifest: load(save(subjects)) is identity. Fields must
// not contain tabs or newlines; locations must not contain semicolons.
void save_manifest(const std::vector<Subject>& subjects, std::ostream& out);
void save_manifest_file(const std::vector<Subject>& subjects,
                        const std::string& path);

}  // namespace tally
