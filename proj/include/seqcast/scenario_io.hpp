#pragma once

#include <string>
#include <vector>

#include "seqcast/jsonio.hpp"
#include "seqcast/scenario.hpp"

namespace seqcast {

Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j, const std::string& context,
                            const DataLimits& limits = {});

void write_scenario(const Scenario& s, const std::string& path);
Scenario read_scenario(const std::string& path, const DataLimits& limits = {});

// A dataset is a directory of scenario files plus an index listing file names
// and split labels.
struct DatasetIndexEntry {
  std::string file;
  std::string split; // "train" | "val"
};

struct Dataset {
  std::string dir;
  std::vector<DatasetIndexEntry> entries;

  std::vector<std::string> files_for_split(const std::string& split) const;
};

void write_dataset(const std::vector<Scenario>& scenarios, const std::string& dir,
                   double train_fraction = 0.8);
Dataset read_dataset_index(const std::string& dir);
std::vector<Scenario> load_split(const Dataset& ds, const std::string& split,
                                 const DataLimits& limits = {});

} // namespace seqcast
