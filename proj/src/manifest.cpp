#include "amr/manifest.hpp"

#include <fstream>

#include <json.hpp>

namespace amr {

using nlohmann::json;

namespace {

template <typename Row, typename Parse>
std::vector<Row> read_jsonl(const std::filesystem::path &path, Parse parse) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        try {
            rows.push_back(parse(line));
        } catch (const std::exception &e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " +
                          e.what());
        }
    }
    return rows;
}

template <typename Row>
void write_jsonl(const std::filesystem::path &path, const std::vector<Row> &rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto &row : rows) {
        out << to_jsonl_line(row) << '\n';
    }
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

const json &field(const json &j, const char *key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw InvalidArgument(std::string("missing field \"") + key + "\"");
    }
    return *it;
}

} // namespace

std::string to_jsonl_line(const AudioItem &item) {
    json anns = json::array();
    for (const auto &a : item.annotations) {
        anns.push_back({{"query", a.query},
                        {"start_s", a.span.start_s},
                        {"end_s", a.span.end_s}});
    }
    json j = {{"audio_id", item.audio_id},
              {"audio_path", item.audio_path},
              {"duration_s", item.duration_s},
              {"annotations", std::move(anns)}};
    return j.dump();
}

AudioItem parse_manifest_line(const std::string &line) {
    const json j = json::parse(line);
    AudioItem item;
    item.audio_id = field(j, "audio_id").get<std::string>();
    item.audio_path = field(j, "audio_path").get<std::string>();
    item.duration_s = field(j, "duration_s").get<double>();
    if (!(item.duration_s >= 0.0)) {
        throw InvalidArgument("negative duration for " + item.audio_id);
    }
    for (const auto &a : field(j, "annotations")) {
        MomentAnnotation ann;
        ann.query = field(a, "query").get<std::string>();
        ann.span = {field(a, "start_s").get<double>(),
                    field(a, "end_s").get<double>()};
        if (ann.query.empty()) {
            throw InvalidArgument("empty query in " + item.audio_id);
        }
        validate(ann.span);
        if (ann.span.start_s < 0.0 || ann.span.end_s > item.duration_s) {
            throw InvalidArgument("annotation outside audio in " + item.audio_id);
        }
        if (!item.annotations.empty() &&
            item.annotations.back().span.start_s > ann.span.start_s) {
            throw InvalidArgument("annotations not sorted by start in " +
                                  item.audio_id);
        }
        item.annotations.push_back(std::move(ann));
    }
    return item;
}

std::vector<AudioItem> read_manifest(const std::filesystem::path &path) {
    return read_jsonl<AudioItem>(path, parse_manifest_line);
}

void write_manifest(const std::filesystem::path &path,
                    const std::vector<AudioItem> &items) {
    write_jsonl(path, items);
}

std::string to_jsonl_line(const PredictionRow &row) {
    json cands = json::array();
    for (const auto &c : row.candidates) {
        cands.push_back({{"start_s", c.span.start_s},
                         {"end_s", c.span.end_s},
                         {"confidence", c.confidence}});
    }
    json j = {{"audio_id", row.audio_id},
              {"query", row.query},
              {"candidates", std::move(cands)}};
    return j.dump();
}

PredictionRow parse_prediction_line(const std::string &line) {
    const json j = json::parse(line);
    PredictionRow row;
    row.audio_id = field(j, "audio_id").get<std::string>();
    row.query = field(j, "query").get<std::string>();
    for (const auto &c : field(j, "candidates")) {
        ScoredSpan s;
        s.span = {field(c, "start_s").get<double>(), field(c, "end_s").get<double>()};
        s.confidence = field(c, "confidence").get<double>();
        validate(s.span);
        row.candidates.push_back(s);
    }
    return row;
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path &path) {
    return read_jsonl<PredictionRow>(path, parse_prediction_line);
}

void write_predictions(const std::filesystem::path &path,
                       const std::vector<PredictionRow> &rows) {
    write_jsonl(path, rows);
}

} // namespace amr
