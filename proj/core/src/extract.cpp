#include "tally/extract.hpp"

#include <algorithm>

namespace tally {

namespace {

std::string vote_key(const std::string& task_id, const std::string& label) {
  return task_id + "." + label;
}

}  // namespace

std::vector<Extract> extract_vote(const ClassificationEvent& event) {
  const auto* single = std::get_if<SingleLabel>(&event.annotation);
  if (single == nullptr) {
    throw WrongAnnotationKind("extract_vote: event " + event.event_id +
                              " does not carry a single-label annotation");
  }
  return {Extract{event.subject_id, event.user_id,
                  vote_key(event.task_id, single->label), 1.0}};
}

std::vector<Extract> extract_group(
    const ClassificationEvent& event,
    const std::vector<SubjectId>& page_subjects) {
  const auto* group = std::get_if<GroupLabel>(&event.annotation);
  if (group == nullptr) {
    throw WrongAnnotationKind("extract_group: event " + event.event_id +
                              " does not carry a group annotation");
  }
  for (const auto& flagged : group->anomaly_subject_ids) {
    if (std::find(page_subjects.begin(), page_subjects.end(), flagged) ==
        page_subjects.end()) {
      throw AnomalyOutsidePage("extract_group: flagged subject " + flagged +
                               " is not on page " + event.subject_id);
    }
  }
  std::vector<Extract> out;
  out.reserve(page_subjects.size());
  for (const auto& member : page_subjects) {
    const bool flagged = group->anomaly_subject_ids.count(member) > 0;
    const std::string& label = flagged ? kAnomalyLabel : group->label;
    out.push_back(
        Extract{member, event.user_id, vote_key(event.task_id, label), 1.0});
  }
  return out;
}

ExtractorRegistry::ExtractorRegistry() {
  fns_["vote"] = [](const ClassificationEvent& event,
                    const ExtractionContext&) { return extract_vote(event); };
  fns_["group"] = [](const ClassificationEvent& event,
                     const ExtractionContext& ctx) {
    if (ctx.page_subjects == nullptr) {
      throw AnomalyOutsidePage("extract_group: no page registered for " +
                               event.subject_id);
    }
    return extract_group(event, *ctx.page_subjects);
  };
}

void ExtractorRegistry::add(const std::string& name, ExtractorFn fn) {
  fns_[name] = std::move(fn);
}

const ExtractorFn& ExtractorRegistry::get(const std::string& name) const {
  auto it = fns_.find(name);
  if (it == fns_.end()) {
    throw std::invalid_argument("unknown extractor: " + name);
  }
  return it->second;
}

bool ExtractorRegistry::contains(const std::string& name) const {
  return fns_.count(name) > 0;
}

std::string extract_label(const std::string& key, const std::string& task_id) {
  const std::string prefix = task_id + ".";
  if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0) {
    throw std::invalid_argument("extract key \"" + key +
                                "\" does not belong to task " + task_id);
  }
  return key.substr(prefix.size());
}

}  // namespace tally
