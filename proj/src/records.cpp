#include "avc/records.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace avc {

using nlohmann::json;

void write_record(std::ostream& out, const EpisodeRecord& record) {
    const EpisodeMeta& m = record.meta;
    json head = {{"type", "episode"},
                 {"case", m.case_name},
                 {"controller", m.controller},
                 {"barrier", m.barrier},
                 {"seed", m.seed},
                 {"episode", m.episode},
                 {"day", m.day},
                 {"offset", m.offset},
                 {"start_index", m.start_index},
                 {"episode_length", m.episode_length},
                 {"buses", m.buses}};
    out << head.dump() << '\n';
    for (const StepRecord& s : record.steps) {
        json line = {{"type", "step"},
                     {"t", s.t},
                     {"v", s.v},
                     {"q_pv", s.q_pv},
                     {"actions", s.actions},
                     {"reward", s.reward},
                     {"total_loss", s.total_loss},
                     {"safety", s.safety}};
        out << line.dump() << '\n';
    }
}

EpisodeRecord read_record(std::istream& in) {
    EpisodeRecord record;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "episode") {
                if (have_header) throw RecordError("line " + std::to_string(number) + ": second episode header");
                EpisodeMeta& m = record.meta;
                m.case_name = j.at("case").get<std::string>();
                m.controller = j.at("controller").get<std::string>();
                m.barrier = j.at("barrier").get<std::string>();
                m.seed = j.at("seed").get<std::uint64_t>();
                m.episode = j.at("episode").get<int>();
                m.day = j.at("day").get<std::size_t>();
                m.offset = j.at("offset").get<std::size_t>();
                m.start_index = j.at("start_index").get<std::size_t>();
                m.episode_length = j.at("episode_length").get<int>();
                m.buses = j.at("buses").get<std::vector<BusIndex>>();
                have_header = true;
            } else if (type == "step") {
                if (!have_header) throw RecordError("line " + std::to_string(number) + ": step before episode header");
                StepRecord s;
                s.t = j.at("t").get<int>();
                s.v = j.at("v").get<std::vector<double>>();
                s.q_pv = j.at("q_pv").get<std::vector<double>>();
                s.actions = j.at("actions").get<std::vector<double>>();
                s.reward = j.at("reward").get<double>();
                s.total_loss = j.at("total_loss").get<double>();
                s.safety = j.at("safety").get<bool>();
                if (s.v.size() != record.meta.buses.size()) {
                    throw RecordError("line " + std::to_string(number) + ": voltage vector does not match the bus list");
                }
                record.steps.push_back(std::move(s));
            } else {
                throw RecordError("line " + std::to_string(number) + ": unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw RecordError("line " + std::to_string(number) + ": " + e.what());
        }
    }
    if (!have_header) throw RecordError("record has no episode header");
    return record;
}

void save_record(const std::filesystem::path& path, const EpisodeRecord& record) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RecordError("cannot write " + path.string());
    write_record(out, record);
}

EpisodeRecord load_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RecordError("cannot read " + path.string());
    try {
        return read_record(in);
    } catch (const RecordError& e) {
        throw RecordError(path.filename().string() + ": " + e.what());
    }
}

std::vector<EpisodeRecord> load_records(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw RecordError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<EpisodeRecord> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_record(f));
    return out;
}

}  // namespace avc
