#include "tally/manifest.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace tally {

namespace {

constexpr const char* kHeader = "subject_id\tlocations\tmetadata";

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

DuplicateSubjectId::DuplicateSubjectId(const SubjectId& id,
                                       std::size_t first, std::size_t second)
    : ManifestError("duplicate subject id \"" + id + "\" at rows " +
                        std::to_string(first) + " and " +
                        std::to_string(second),
                    second),
      subject_id(id),
      first_row(first) {}

std::vector<Subject> load_manifest(std::istream& in) {
  std::vector<Subject> subjects;
  std::map<SubjectId, std::size_t> seen_rows;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    row += 1;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header_seen) {
      if (line != kHeader) {
        throw MissingColumn(
            "manifest header must be \"subject_id<TAB>locations<TAB>"
            "metadata\", got \"" + line + "\"",
            row);
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 3) {
      throw MissingColumn("expected 3 tab-separated columns, got " +
                              std::to_string(cols.size()),
                          row);
    }
    Subject subject;
    subject.id = cols[0];
    if (subject.id.empty()) {
      throw MissingColumn("empty subject_id", row);
    }
    if (auto it = seen_rows.find(subject.id); it != seen_rows.end()) {
      throw DuplicateSubjectId(subject.id, it->second, row);
    }
    seen_rows.emplace(subject.id, row);
    if (!cols[1].empty()) {
      subject.locations = split(cols[1], ';');
    }
    nlohmann::json meta = nlohmann::json::parse(cols[2], nullptr, false);
    if (meta.is_discarded()) {
      throw MalformedMetadata("metadata is not valid JSON", row);
    }
    if (!meta.is_object()) {
      throw MalformedMetadata("metadata must be a JSON object", row);
    }
    subject.metadata = std::move(meta);
    try {
      validate_subject(subject);
    } catch (const std::invalid_argument& e) {
      throw MalformedMetadata(std::string(e.what()), row);
    }
    subjects.push_back(std::move(subject));
  }
  if (!header_seen) {
    throw MissingColumn("manifest has no header row", row);
  }
  return subjects;
}

std::vector<Subject> load_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ManifestError("cannot open manifest: " + path, 0);
  }
  return load_manifest(in);
}

void save_manifest(const std::vector<Subject>& subjects, std::ostream& out) {
  out << "# tally-manifest v1\n" << kHeader << "\n";
  for (const Subject& s : subjects) {
    out << s.id << '\t';
    for (std::size_t i = 0; i < s.locations.size(); ++i) {
      if (i > 0) {
        out << ';';
      }
      out << s.locations[i];
    }
    out << '\t' << s.metadata.dump() << '\n';
  }
}

void save_manifest_file(const std::vector<Subject>& subjects,
                        const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ManifestError("cannot write manifest: " + path, 0);
  }
  save_manifest(subjects, out);
  out.flush();
  if (!out) {
    throw ManifestError("short write to manifest: " + path, 0);
  }
}

}  // namespace tally
