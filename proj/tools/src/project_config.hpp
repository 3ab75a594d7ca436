#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tally/engine.hpp"

namespace tally::cli {

// On-disk project description: engine configuration plus where the subject
// manifest lives. File paths inside the config resolve against the config
// file's own directory.
struct ProjectConfig {
  EngineConfig engine;
  std::string manifest_path;
  // Explicit per-workflow subject lists; workflows not listed take every
  // manifest subject.
  std::map<WorkflowId, std::vector<SubjectId>> subject_links;
  std::map<SubjectId, std::vector<SubjectId>> grid_pages;
  std::vector<UserProfile> users;
};

// Throws std::runtime_error (or a parse error subtype) with a message
// naming the offending field.
ProjectConfig load_project_file(const std::string& path);

// Engine with manifest subjects loaded, linked into pools, pages
// registered, and seeded users upserted.
std::unique_ptr<Engine> build_engine(const ProjectConfig& config);

// `init`: writes project.json, manifest.tsv and rules/main.json under dir.
void write_sample_project(const std::string& dir);

}  // namespace tally::cli
