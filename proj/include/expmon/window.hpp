#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "expmon/observation.hpp"
#include "expmon/scenario.hpp"

namespace expmon {

inline constexpr std::size_t kDefaultWindowSize = 500;

// Immutable copy of a model's window: rows in arrival order plus columnar
// views derived from them. `end_sequence` counts every observation the model
// has ever ingested and names the snapshot.
class WindowView {
 public:
  WindowView() = default;
  WindowView(ModelRef model, std::uint64_t end_sequence, std::vector<Observation> rows);

  const ModelRef& model() const { return model_; }
  std::uint64_t end_sequence() const { return end_sequence_; }
  std::size_t fill() const { return rows_.size(); }
  const std::vector<Observation>& rows() const { return rows_; }
  std::string id() const;

  // Empty when the feature is absent or categorical.
  const std::vector<double>& numeric_column(const std::string& feature) const;
  const std::vector<std::string>& categorical_column(const std::string& feature) const;
  std::map<std::string, std::uint64_t> category_counts(const std::string& feature) const;

 private:
  ModelRef model_;
  std::uint64_t end_sequence_ = 0;
  std::vector<Observation> rows_;
  std::map<std::string, std::vector<double>> numeric_;
  std::map<std::string, std::vector<std::string>> categorical_;
};

WindowView apply_subgroup_filter(const WindowView& view, const SubgroupPredicate& predicate);

// Count-based FIFO windows, one per registered model.
class WindowStore {
 public:
  explicit WindowStore(std::size_t capacity = kDefaultWindowSize);

  std::size_t capacity() const { return capacity_; }

  void register_model(const ModelRef& model, FeatureSchema schema);
  bool has_model(const ModelRef& model) const;

  // All-or-nothing: the whole batch is checked before any window changes.
  // Returns the fill count of every model touched by the batch, keyed by
  // ModelRef::key().
  std::map<std::string, std::size_t> ingest_batch(std::span<const Observation> batch);
  // The checks ingest_batch runs, without inserting anything.
  void validate_batch(std::span<const Observation> batch) const;

  WindowView snapshot(const ModelRef& model) const;
  std::uint64_t total_ingested(const ModelRef& model) const;

 private:
  void validate_locked(std::span<const Observation> batch) const;

  struct ModelWindow {
    ModelRef model;
    FeatureSchema schema;
    std::deque<Observation> rows;
    std::uint64_t total = 0;
  };

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::map<std::string, ModelWindow> windows_;
};

}  // namespace expmon
