#include "expmon/window.hpp"

#include "expmon/error.hpp"

namespace expmon {

WindowView::WindowView(ModelRef model, std::uint64_t end_sequence, std::vector<Observation> rows)
    : model_(std::move(model)), end_sequence_(end_sequence), rows_(std::move(rows)) {
  for (const auto& row : rows_) {
    for (const auto& [name, value] : row.features) {
      if (const double* x = std::get_if<double>(&value))
        numeric_[name].push_back(*x);
      else
        categorical_[name].push_back(std::get<std::string>(value));
    }
    if (row.prediction) numeric_[std::string(kPredictionColumn)].push_back(*row.prediction);
  }
}

std::string WindowView::id() const { return model_.key() + "#" + std::to_string(end_sequence_); }

const std::vector<double>& WindowView::numeric_column(const std::string& feature) const {
  static const std::vector<double> empty;
  auto it = numeric_.find(feature);
  return it == numeric_.end() ? empty : it->second;
}

const std::vector<std::string>& WindowView::categorical_column(const std::string& feature) const {
  static const std::vector<std::string> empty;
  auto it = categorical_.find(feature);
  return it == categorical_.end() ? empty : it->second;
}

std::map<std::string, std::uint64_t> WindowView::category_counts(const std::string& feature) const {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& token : categorical_column(feature)) ++counts[token];
  return counts;
}

WindowView apply_subgroup_filter(const WindowView& view, const SubgroupPredicate& predicate) {
  std::vector<Observation> kept;
  for (const auto& row : view.rows())
    if (predicate.matches(row)) kept.push_back(row);
  return WindowView(view.model(), view.end_sequence(), std::move(kept));
}

WindowStore::WindowStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorKind::invalid_config, "window size must be >= 1");
}

void WindowStore::register_model(const ModelRef& model, FeatureSchema schema) {
  std::lock_guard lock(mutex_);
  auto& w = windows_[model.key()];
  w.model = model;
  w.schema = std::move(schema);
}

bool WindowStore::has_model(const ModelRef& model) const {
  std::lock_guard lock(mutex_);
  return windows_.count(model.key()) > 0;
}

void WindowStore::validate_batch(std::span<const Observation> batch) const {
  std::lock_guard lock(mutex_);
  validate_locked(batch);
}

void WindowStore::validate_locked(std::span<const Observation> batch) const {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto it = windows_.find(batch[i].model.key());
    if (it == windows_.end())
      throw Error(ErrorKind::unknown_model, "observation " + std::to_string(i) + ": " + batch[i].model.key());
    try {
      it->second.schema.check(batch[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "observation " + std::to_string(i) + ": " + e.detail());
    }
  }
}

std::map<std::string, std::size_t> WindowStore::ingest_batch(std::span<const Observation> batch) {
  std::lock_guard lock(mutex_);
  validate_locked(batch);

  std::map<std::string, std::size_t> fills;
  for (const auto& obs : batch) {
    auto& w = windows_.at(obs.model.key());
    w.rows.push_back(obs);
    if (w.rows.size() > capacity_) w.rows.pop_front();
    ++w.total;
    fills[obs.model.key()] = w.rows.size();
  }
  return fills;
}

WindowView WindowStore::snapshot(const ModelRef& model) const {
  std::lock_guard lock(mutex_);
  auto it = windows_.find(model.key());
  if (it == windows_.end()) throw Error(ErrorKind::unknown_model, model.key());
  return WindowView(model, it->second.total,
                    std::vector<Observation>(it->second.rows.begin(), it->second.rows.end()));
}

std::uint64_t WindowStore::total_ingested(const ModelRef& model) const {
  std::lock_guard lock(mutex_);
  auto it = windows_.find(model.key());
  if (it == windows_.end()) throw Error(ErrorKind::unknown_model, model.key());
  return it->second.total;
}

}  // namespace expmon
