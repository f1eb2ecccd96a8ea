#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "avc/metrics.hpp"

namespace avc {

class RecordError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Line-delimited JSON: one "episode" header line followed by one "step"
/// line per environment step. Doubles round-trip exactly.
void write_record(std::ostream& out, const EpisodeRecord& record);
EpisodeRecord read_record(std::istream& in);

void save_record(const std::filesystem::path& path, const EpisodeRecord& record);
EpisodeRecord load_record(const std::filesystem::path& path);

/// Every `*.jsonl` file in `dir`, in file-name order.
std::vector<EpisodeRecord> load_records(const std::filesystem::path& dir);

}  // namespace avc
