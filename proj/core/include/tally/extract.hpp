#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tally/types.hpp"

namespace tally {

// One numeric feature pulled out of a classification, keyed "<task>.<label>".
struct Extract {
  SubjectId subject_id;
  UserId user_id;
  std::string key;
  double value = 0.0;

  friend bool operator==(const Extract&, const Extract&) = default;
};

struct WrongAnnotationKind : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct AnomalyOutsidePage : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// SingleLabel annotation -> one Extract {"<task>.<class>": 1} for the
// event's subject. Throws WrongAnnotationKind for group annotations.
std::vector<Extract> extract_vote(const ClassificationEvent& event);

// GroupLabel annotation over a grid page: one class-vote extract per
// unflagged page subject, one "<task>.anomaly" extract per flagged subject.
// Throws AnomalyOutsidePage when a flagged id is not on the page.
std::vector<Extract> extract_group(const ClassificationEvent& event,
                                   const std::vector<SubjectId>& page_subjects);

struct ExtractionContext {
  const Workflow* workflow = nullptr;
  const std::vector<SubjectId>* page_subjects = nullptr;
};

using ExtractorFn = std::function<std::vector<Extract>(
    const ClassificationEvent&, const ExtractionContext&)>;

// Maps config names to extractor implementations. "vote" and "group" are
// built in; external extractors register under new names and may shadow the
// built-ins.
class ExtractorRegistry {
 public:
  ExtractorRegistry();
  void add(const std::string& name, ExtractorFn fn);
  const ExtractorFn& get(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::map<std::string, ExtractorFn> fns_;
};

// Label token of an extract key, i.e. the part after "<task>.". Throws when
// the key does not match the event task.
std::string extract_label(const std::string& key, const std::string& task_id);

}  // namespace tally
