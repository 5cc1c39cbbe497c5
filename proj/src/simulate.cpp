#include "amr/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "amr/manifest.hpp"
#include "amr/wav.hpp"

namespace amr {

void validate(const SimulationConfig &cfg) {
    if (!(cfg.beta_s >= 0.0) || !std::isfinite(cfg.beta_s)) {
        throw InvalidArgument("beta must be a finite non-negative number of seconds");
    }
    if (!(cfg.trim_threshold_db > 0.0)) {
        throw InvalidArgument("trim threshold must be positive");
    }
    if (!(cfg.trim_frame_ms > 0.0)) {
        throw InvalidArgument("trim frame length must be positive");
    }
    if (!(cfg.segment_hop_s > 0.0) || !(cfg.segment_len_s > 0.0)) {
        throw InvalidArgument("segment length and hop must be positive");
    }
    if (cfg.sample_rate_hz <= 0) {
        throw InvalidArgument("sample rate must be positive");
    }
    if (cfg.fg_gain_db.lo > cfg.fg_gain_db.hi || cfg.bg_gain_jitter_db.lo > cfg.bg_gain_jitter_db.hi) {
        throw InvalidArgument("gain ranges must satisfy lo <= hi");
    }
}

double rms(std::span<const float> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double rms_db(std::span<const float> x) { return 20.0 * std::log10(rms(x)); }

namespace {

double mean_square(std::span<const float> x) {
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

double uniform(Rng &rng, const DbRange &r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

} // namespace

SampleRange trim_silence(std::span<const float> x, const SimulationConfig &cfg) {
    if (x.empty()) {
        throw InvalidArgument("cannot trim an empty clip");
    }
    const std::size_t n = x.size();
    const auto frame = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.trim_frame_ms * 1e-3 * cfg.sample_rate_hz)));
    const double floor_power = mean_square(x) * std::pow(10.0, -cfg.trim_threshold_db / 10.0);
    const auto loud = [&](std::size_t lo, std::size_t hi) {
        return mean_square(x.subspan(lo, hi - lo)) >= floor_power;
    };

    std::size_t begin = n;
    for (std::size_t lo = 0; lo < n; lo += frame) {
        if (loud(lo, std::min(lo + frame, n))) {
            begin = lo;
            break;
        }
    }
    if (begin == n) {
        return {0, n};
    }
    std::size_t end = 0;
    for (std::size_t hi = n; hi > 0;) {
        const std::size_t lo = hi > frame ? hi - frame : 0;
        if (loud(lo, hi)) {
            end = hi;
            break;
        }
        hi = lo;
    }
    if (end <= begin) {
        // the two frame grids disagree on a very short loud burst
        end = std::min(n, begin + frame);
    }
    return {begin, end};
}

double sample_interval(Rng &rng, double beta_s) {
    if (!(beta_s >= 0.0)) {
        throw InvalidArgument("beta must be non-negative");
    }
    if (beta_s == 0.0) return 0.0;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return -beta_s * std::log1p(-u);
}

GainResult apply_gain_to_power(std::span<const float> x, double target_db) {
    GainResult out;
    const double level = rms(x);
    if (level == 0.0) {
        out.samples.assign(x.begin(), x.end());
        out.silent = true;
        return out;
    }
    const double scale = std::pow(10.0, target_db / 20.0) / level;
    out.samples.resize(x.size());
    std::transform(x.begin(), x.end(), out.samples.begin(),
                   [scale](float v) { return static_cast<float>(v * scale); });
    return out;
}

AudioSource::AudioSource(std::filesystem::path path) : path_(std::move(path)) {
    const WavInfo info = read_wav_info(path_);
    frames_ = info.frames;
    file_rate_ = info.sample_rate;
    name_ = path_.filename().string();
}

AudioSource::AudioSource(std::vector<float> samples, std::string name)
    : samples_(std::make_shared<const std::vector<float>>(std::move(samples))),
      frames_(samples_->size()), name_(std::move(name)) {}

std::vector<float> AudioSource::load(int sample_rate, std::size_t offset,
                                     std::size_t count) const {
    if (samples_) {
        if (offset > samples_->size()) {
            throw InvalidArgument("offset past end of " + name_);
        }
        const std::size_t n = std::min(count, samples_->size() - offset);
        return {samples_->begin() + static_cast<std::ptrdiff_t>(offset),
                samples_->begin() + static_cast<std::ptrdiff_t>(offset + n)};
    }
    if (file_rate_ != sample_rate) {
        throw IoError(path_.string() + ": sample rate " + std::to_string(file_rate_) +
                      " Hz, expected " + std::to_string(sample_rate) + " Hz");
    }
    return read_wav(path_, offset, count);
}

SegmentResult segment_background(const AudioSource &audio, const SimulationConfig &cfg) {
    validate(cfg);
    const auto len = static_cast<std::size_t>(std::llround(cfg.segment_len_s * cfg.sample_rate_hz));
    const auto hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.segment_hop_s * cfg.sample_rate_hz)));
    SegmentResult out;
    if (audio.frames() < len || len == 0) {
        out.too_short = true;
        return out;
    }
    for (std::size_t off = 0; off + len <= audio.frames(); off += hop) {
        out.pool.segments.push_back({audio, off, len});
    }
    return out;
}

GeneratedSample generate_sample(std::span<const float> background, const ForegroundPool &pool,
                                const SimulationConfig &cfg, Rng &rng) {
    validate(cfg);
    if (pool.entries.empty()) {
        throw InvalidArgument("foreground pool is empty");
    }
    GeneratedSample out;
    out.background_gain_db = cfg.bg_target_db + uniform(rng, cfg.bg_gain_jitter_db);
    out.background = apply_gain_to_power(background, out.background_gain_db).samples;
    out.mix = out.background;

    const int sr = cfg.sample_rate_hz;
    const std::size_t total = background.size();
    std::size_t cursor = 0;  // t, in samples
    while (true) {
        const double gap = sample_interval(rng, cfg.beta_s);
        out.interval_draws.push_back(gap);
        const std::size_t fg_index =
            std::uniform_int_distribution<std::size_t>(0, pool.entries.size() - 1)(rng);
        const ForegroundEntry &entry = pool.entries[fg_index];
        if (entry.captions.empty()) {
            throw InvalidArgument("foreground clip " + entry.audio.name() + " has no caption");
        }
        const std::size_t caption_index =
            std::uniform_int_distribution<std::size_t>(0, entry.captions.size() - 1)(rng);

        const std::vector<float> raw = entry.audio.load(sr);
        if (raw.empty()) {
            throw InvalidArgument("foreground clip " + entry.audio.name() + " is empty");
        }
        const SampleRange kept = trim_silence(raw, cfg);

        const double start_pos = static_cast<double>(cursor) + gap * sr;
        if (start_pos + static_cast<double>(kept.size()) > static_cast<double>(total)) {
            break;
        }
        const auto start = static_cast<std::size_t>(std::llround(start_pos));
        const std::size_t end = start + kept.size();
        if (end > total) {
            break;
        }

        const double gain_db = uniform(rng, cfg.fg_gain_db);
        const auto clip = apply_gain_to_power(
            std::span<const float>(raw).subspan(kept.begin, kept.size()), gain_db);
        for (std::size_t i = 0; i < clip.samples.size(); ++i) {
            out.mix[start + i] += clip.samples[i];
        }

        PlacedMoment placed;
        placed.samples = {start, end};
        placed.annotation = {entry.captions[caption_index], placed.samples.to_span(sr)};
        placed.foreground_index = fg_index;
        placed.gain_db = gain_db;
        out.moments.push_back(std::move(placed));
        cursor = end;
    }
    return out;
}

std::string item_id(std::size_t index) {
    std::ostringstream id;
    id << "item_" << std::setw(6) << std::setfill('0') << index;
    return id.str();
}

DatasetResult generate_dataset(const ForegroundPool &fg, const BackgroundPool &bg,
                               std::size_t n_items, const SimulationConfig &cfg,
                               const std::filesystem::path &out_dir, unsigned threads) {
    validate(cfg);
    if (n_items > 0 && (fg.entries.empty() || bg.segments.empty())) {
        throw InvalidArgument("foreground and background pools must be non-empty");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "audio", ec);
    if (ec) {
        throw IoError("cannot create " + (out_dir / "audio").string() + ": " + ec.message());
    }

    DatasetResult result;
    result.items.resize(n_items);
    std::vector<std::vector<double>> draws(n_items);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_items) return;
            try {
                Rng rng(derive_seed(cfg.seed, i));
                const std::size_t seg_index =
                    std::uniform_int_distribution<std::size_t>(0, bg.segments.size() - 1)(rng);
                const BackgroundSegment &seg = bg.segments[seg_index];
                const auto background = seg.audio.load(cfg.sample_rate_hz, seg.offset, seg.length);
                GeneratedSample sample = generate_sample(background, fg, cfg, rng);

                AudioItem &item = result.items[i];
                item.audio_id = item_id(i);
                item.audio_path = "audio/" + item.audio_id + ".wav";
                item.duration_s = static_cast<double>(sample.mix.size()) / cfg.sample_rate_hz;
                for (auto &m : sample.moments) {
                    item.annotations.push_back(std::move(m.annotation));
                }
                draws[i] = std::move(sample.interval_draws);
                write_wav(out_dir / item.audio_path, sample.mix, cfg.sample_rate_hz);
            } catch (const std::exception &e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    try {
                        throw IoError("item " + std::to_string(i) + ": " + e.what());
                    } catch (...) {
                        failure = std::current_exception();
                    }
                }
                next.store(n_items);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const unsigned count = std::max(1u, threads);
        for (unsigned t = 0; t < count; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    write_manifest(out_dir / "manifest.jsonl", result.items);

    double draw_sum = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
        result.summary.moments += result.items[i].annotations.size();
        for (double d : draws[i]) {
            draw_sum += d;
            ++result.summary.interval_draws;
        }
    }
    result.summary.items = n_items;
    result.summary.mean_interval_s =
        result.summary.interval_draws ? draw_sum / static_cast<double>(result.summary.interval_draws)
                                      : 0.0;
    return result;
}

namespace {

// RFC 4180 record splitter; handles quoted fields with embedded commas,
// doubled quotes and line breaks.
std::vector<std::vector<std::string>> parse_csv(std::istream &in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c = 0;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field.push_back(c);
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

ForegroundPool load_foreground_pool(const std::filesystem::path &audio_dir,
                                    const std::filesystem::path &captions_csv) {
    std::ifstream in(captions_csv, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + captions_csv.string());
    }
    const auto rows = parse_csv(in);
    if (rows.empty() || rows.front().empty() || rows.front().front() != "file_name") {
        throw IoError(captions_csv.string() + ": expected header starting with file_name");
    }
    ForegroundPool pool;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto &row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        ForegroundEntry entry;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (!row[c].empty()) entry.captions.push_back(row[c]);
        }
        if (entry.captions.empty()) {
            throw IoError(captions_csv.string() + ": row " + std::to_string(r + 1) +
                          " has no caption");
        }
        entry.audio = AudioSource(audio_dir / row[0]);
        pool.entries.push_back(std::move(entry));
    }
    return pool;
}

BackgroundPool load_background_pool(const std::filesystem::path &dir,
                                    const SimulationConfig &cfg) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto &e : std::filesystem::directory_iterator(dir, ec)) {
        if (e.is_regular_file() && e.path().extension() == ".wav") {
            files.push_back(e.path());
        }
    }
    if (ec) {
        throw IoError("cannot list " + dir.string() + ": " + ec.message());
    }
    std::sort(files.begin(), files.end());
    BackgroundPool pool;
    for (const auto &f : files) {
        auto seg = segment_background(AudioSource(f), cfg);
        for (auto &s : seg.pool.segments) {
            pool.segments.push_back(std::move(s));
        }
    }
    return pool;
}

} // namespace amr
