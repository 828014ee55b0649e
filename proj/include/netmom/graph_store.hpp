#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "netmom/backtest.hpp"

namespace netmom {

/// Schedules stored as JSON batches under `<root>/<key>/batch_<n>.json`, one batch per
/// `batch_days` trading days, and search results under `<root>/search/<split>.json`.
/// Each batch is rewritten atomically whenever one of its dates is learned.
class FileScheduleStore : public ScheduleStore {
 public:
  FileScheduleStore(std::filesystem::path root, Eigen::Index batch_days, double edge_threshold,
                    bool read_only = false);

  std::set<Eigen::Index> load(const std::string& key, GraphSchedule& schedule) override;
  void save(const std::string& key, std::span<const Eigen::Index> attempted,
            const GraphSchedule& schedule) override;
  std::optional<GridSearchResult> load_search(const std::string& split) override;
  void save_search(const std::string& split, const GridSearchResult& result) override;
  bool read_only() const override { return read_only_; }

  const std::filesystem::path& root() const { return root_; }
  bool exists() const;

 private:
  std::filesystem::path batch_path(const std::string& key, Eigen::Index batch) const;

  std::filesystem::path root_;
  Eigen::Index batch_days_;
  double edge_threshold_;
  bool read_only_;
  std::map<std::string, std::set<Eigen::Index>> attempted_;
};

}  // namespace netmom
