#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "v6covert/channels.hpp"
#include "v6covert/features.hpp"
#include "v6covert/ml/gradient_boosting.hpp"
#include "v6covert/ml/matrix.hpp"
#include "v6covert/ml/random_forest.hpp"

namespace v6covert::ml {

// binary: 0 normal, 1 covert. multiclass: the ChannelKind value.
enum class Task { binary, multiclass };

std::string_view task_name(Task task);
std::size_t class_count(Task task);
int class_index(ChannelKind label, Task task);
std::vector<int> class_indices(std::span<const ChannelKind> labels, Task task);
std::vector<std::string_view> class_names(Task task);

Matrix to_matrix(std::span<const FeatureVector> rows);

enum class ModelKind { random_forest, gradient_boosting };
std::string_view model_kind_name(ModelKind kind);

inline constexpr int kModelFormatVersion = 1;

class EnsembleModel {
 public:
  EnsembleModel(RandomForestModel model) : model_(std::move(model)) {}
  EnsembleModel(GradientBoostingModel model) : model_(std::move(model)) {}

  ModelKind kind() const;
  Task task() const { return class_count() == 2 ? Task::binary : Task::multiclass; }
  std::size_t feature_count() const;
  std::size_t class_count() const;

  // Throws Error{dimension_mismatch} when x has the wrong width.
  std::vector<int> predict(const Matrix& x) const;

  const RandomForestModel* forest() const { return std::get_if<RandomForestModel>(&model_); }
  const GradientBoostingModel* boosting() const { return std::get_if<GradientBoostingModel>(&model_); }

  std::string to_json() const;
  // Throws Error{model_load} on a corrupt document or version mismatch.
  static EnsembleModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static EnsembleModel load(const std::filesystem::path& path);

  bool operator==(const EnsembleModel&) const = default;

 private:
  std::variant<RandomForestModel, GradientBoostingModel> model_;
};

// Stage 1 separates covert from normal; stage-1 normals are final. Packets
// flagged covert get the stage-2 label, which may still be normal.
// Throws Error{dimension_mismatch} when the models or x disagree on shape.
std::vector<ChannelKind> run_two_stage_pipeline(const EnsembleModel& binary, const EnsembleModel& multiclass,
                                                const Matrix& x);

}  // namespace v6covert::ml
