#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sgg/box.hpp"

namespace sgg {

// Category names for objects and predicates. Index 0 of each list is the
// reserved background / no-relation entry.
struct LabelSet {
  std::vector<std::string> classes;     // classes[0] == "__background__"
  std::vector<std::string> predicates;  // predicates[0] == "__no_relation__"

  std::size_t num_classes() const { return classes.size() - 1; }
  std::size_t num_predicates() const { return predicates.size() - 1; }
  int class_index(const std::string& name) const;      // throws DataError if unknown
  int predicate_index(const std::string& name) const;  // throws DataError if unknown

  static LabelSet make(const std::vector<std::string>& classes, const std::vector<std::string>& predicates);
};

inline constexpr const char* kBackgroundClass = "__background__";
inline constexpr const char* kNoRelation = "__no_relation__";

struct SceneObject {
  Box box;
  int label = 0;  // class index, >= 1
};

struct SceneRelation {
  std::size_t subj = 0;
  std::size_t obj = 0;
  int predicate = 0;  // predicate index, >= 1
};

// One synthetic image: ground-truth objects, relations and the rendered image path.
struct Scene {
  std::string id;
  int width = 64;
  int height = 64;
  std::string image;  // relative to the dataset directory
  std::vector<SceneObject> objects;
  std::vector<SceneRelation> relations;
};

// Dataset on disk: meta.json (label set), scenes.jsonl (one scene per line).
struct Dataset {
  std::filesystem::path root;
  LabelSet labels;
  std::vector<Scene> scenes;
};

std::string scene_to_json_line(const Scene& scene, const LabelSet& labels);
Scene scene_from_json_line(const std::string& line, const LabelSet& labels, std::size_t line_no);

void write_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes, const LabelSet& labels);
std::vector<Scene> read_scenes(const std::filesystem::path& path, const LabelSet& labels);

void write_labels(const std::filesystem::path& path, const LabelSet& labels);
LabelSet read_labels(const std::filesystem::path& path);

// Loads meta.json + scenes.jsonl from a dataset directory.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace sgg
