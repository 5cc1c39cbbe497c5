#include "amr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "amr/baseline.hpp"
#include "amr/embeddings.hpp"
#include "amr/fixtures.hpp"
#include "amr/losses.hpp"
#include "amr/simulate.hpp"

namespace amr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Merges a flat JSON object of option values into `sub`. Keys are long
// option names without dashes; options already given on the command line win.
void apply_config(CLI::App *sub, const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw InvalidArgument(path + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw InvalidArgument(path + ": config must be a JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        CLI::Option *opt = sub->get_option_no_throw("--" + it.key());
        if (opt == nullptr || it.key() == "config") {
            throw InvalidArgument(path + ": unknown key \"" + it.key() + "\" for " +
                                  sub->get_name());
        }
        if (opt->count() > 0) continue;
        const auto scalar = [&](const json &v) -> std::string {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
            if (v.is_number()) return v.dump();
            throw InvalidArgument(path + ": unsupported value for \"" + it.key() + "\"");
        };
        std::vector<std::string> values;
        if (it->is_array()) {
            for (const auto &v : *it) values.push_back(scalar(v));
        } else {
            values.push_back(scalar(*it));
        }
        try {
            opt->add_result(values);
            opt->run_callback();
        } catch (const CLI::Error &e) {
            throw InvalidArgument(path + ": \"" + it.key() + "\": " + e.what());
        }
    }
}

void require(const CLI::App *sub, std::initializer_list<const char *> names) {
    for (const char *name : names) {
        if (sub->get_option(name)->count() == 0) {
            throw InvalidArgument(sub->get_name() + ": " + name + " is required");
        }
    }
}

std::string theta_key(double t) {
    std::ostringstream s;
    s << t;
    return s.str();
}

std::vector<double> parse_threshold_list(const std::vector<double> &v, const char *what) {
    for (double t : v) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw InvalidArgument(std::string(what) + " must lie in [0, 1]");
        }
    }
    return v;
}

void ensure_parent(const fs::path &file) {
    if (file.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(file.parent_path(), ec);
        if (ec) throw IoError("cannot create " + file.parent_path().string());
    }
}

void write_text(const fs::path &path, const std::string &text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> distinct_queries(const AudioItem &item) {
    std::vector<std::string> out;
    for (const auto &a : item.annotations) {
        if (std::find(out.begin(), out.end(), a.query) == out.end()) out.push_back(a.query);
    }
    return out;
}

std::vector<Span> spans_for(const AudioItem &item, const std::string &query) {
    std::vector<Span> out;
    for (const auto &a : item.annotations) {
        if (a.query == query) out.push_back(a.span);
    }
    return out;
}

EmbeddingStore load_audio_store(const fs::path &dir, const AudioItem &item, double window_s) {
    EmbeddingStore store = read_store(audio_store_path(dir, item.audio_id));
    if (store.kind() != StoreKind::AudioWindows) {
        throw IoError(item.audio_id + ": audio store has kind " + to_string(store.kind()));
    }
    if (window_s > 0.0 && std::abs(store.window_s() - window_s) > 1e-9) {
        throw InvalidArgument(item.audio_id + ": store window " + theta_key(store.window_s()) +
                              " s differs from requested " + theta_key(window_s) + " s");
    }
    return store;
}

// Similarity curves for every query of every item, in manifest order.
struct QueryCurves {
    std::string audio_id;
    std::string query;
    TuningQuery curve;
    double window_s = 0.0;
    double hop_s = 1.0;
};

std::vector<QueryCurves> compute_curves(std::span<const AudioItem> items, const fs::path &dir,
                                        double window_s) {
    std::vector<QueryCurves> out;
    for (const auto &item : items) {
        const EmbeddingStore audio = load_audio_store(dir, item, window_s);
        for (const auto &q : distinct_queries(item)) {
            const EmbeddingStore text = read_store(text_store_path(dir, q));
            QueryCurves qc;
            qc.audio_id = item.audio_id;
            qc.query = q;
            qc.curve.sims = similarity_curve(audio, text);
            qc.curve.ground_truths = spans_for(item, q);
            qc.curve.duration_s = item.duration_s;
            qc.window_s = audio.window_s();
            qc.hop_s = audio.hop_s();
            out.push_back(std::move(qc));
        }
    }
    return out;
}

json sed_json(const SedScores &s, double threshold) {
    return {{"threshold", threshold},
            {"precision", s.precision},
            {"recall", s.recall},
            {"f1", s.f1},
            {"true_positives", s.true_positives},
            {"false_positives", s.false_positives},
            {"false_negatives", s.false_negatives},
            {"predicted_positive", s.true_positives + s.false_positives}};
}

SedScores sed_at(std::span<const AudioItem> manifest,
                 const std::map<std::string, std::vector<const PredictionRow *>> &by_item,
                 double threshold, double frame_s) {
    SedCounts total;
    for (const auto &item : manifest) {
        std::map<std::string, std::vector<Span>> gt, pred;
        for (const auto &a : item.annotations) gt[a.query].push_back(a.span);
        if (auto it = by_item.find(item.audio_id); it != by_item.end()) {
            for (const PredictionRow *row : it->second) {
                auto &spans = pred[row->query];
                for (const auto &c : row->candidates) {
                    if (c.confidence >= threshold) spans.push_back(c.span);
                }
            }
        }
        total += sed_frame_counts(pred, gt, item.duration_s, frame_s);
    }
    return sed_scores(total);
}

} // namespace

JoinedQueries join_predictions(std::span<const AudioItem> manifest,
                               std::span<const PredictionRow> predictions) {
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    JoinedQueries out;
    for (const auto &item : manifest) {
        for (const auto &q : distinct_queries(item)) {
            index.emplace(std::pair{item.audio_id, q}, out.results.size());
            QueryResult r;
            r.ground_truths = spans_for(item, q);
            r.duration_s = item.duration_s;
            out.results.push_back(std::move(r));
        }
    }
    std::vector<bool> seen(out.results.size(), false);
    std::vector<std::string> unmatched;
    for (const auto &row : predictions) {
        auto it = index.find({row.audio_id, row.query});
        if (it == index.end()) {
            unmatched.push_back(row.audio_id + "\t" + row.query);
            continue;
        }
        auto &cands = out.results[it->second].candidates;
        cands.insert(cands.end(), row.candidates.begin(), row.candidates.end());
        seen[it->second] = true;
    }
    if (!unmatched.empty()) {
        throw JoinError(std::to_string(unmatched.size()) +
                            " prediction row(s) have no ground truth in the manifest",
                        std::move(unmatched));
    }
    out.missing_predictions = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
    return out;
}

std::string report_to_json(const MetricReport &report) {
    json r1 = json::object(), map = json::object();
    for (const auto &[t, v] : report.r1_at) r1[theta_key(t)] = v;
    for (const auto &[t, v] : report.map_at) map[theta_key(t)] = v;
    json j = {{"num_queries", report.num_queries},
              {"r1", r1},
              {"map", map},
              {"avg_map", report.avg_map}};
    return j.dump(2);
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Audio moment retrieval toolkit: dataset simulation, set-prediction "
                 "losses, sliding-window baseline and evaluation.",
                 "amr"};
    app.require_subcommand(1);
    app.set_version_flag("--version",
                         "amr 1.0.0 (manifest format v" + std::to_string(kManifestFormatVersion) +
                             ", embedding store format v" + std::to_string(kStoreFormatVersion) +
                             ", predictions format v" + std::to_string(kPredictionsFormatVersion) +
                             ")");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress warnings");
    std::map<CLI::App *, std::string> config_files;
    const auto add_config = [&](CLI::App *sub) {
        sub->add_option("--config", config_files[sub],
                        "JSON file of option values; flags take precedence");
    };
    const auto warn = [&](const std::string &msg) {
        if (!quiet) err << "warning: " << msg << '\n';
    };

    // simulate
    SimulationConfig sim;
    std::string fg_audio, fg_captions, bg_audio, sim_out;
    std::size_t n_items = 0;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    auto *simulate = app.add_subcommand("simulate", "Generate a moment-annotated dataset");
    simulate->add_option("--fg-audio", fg_audio, "Directory of foreground WAV clips");
    simulate->add_option("--fg-captions", fg_captions, "Caption CSV (file_name,caption_1..)");
    simulate->add_option("--bg-audio", bg_audio, "Directory of background WAV recordings");
    simulate->add_option("--out", sim_out, "Output directory");
    simulate->add_option("--n", n_items, "Number of items");
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--beta", sim.beta_s, "Mean gap between moments (s)")->capture_default_str();
    simulate->add_option("--fg-gain-lo", sim.fg_gain_db.lo)->capture_default_str();
    simulate->add_option("--fg-gain-hi", sim.fg_gain_db.hi)->capture_default_str();
    simulate->add_option("--bg-target-db", sim.bg_target_db)->capture_default_str();
    simulate->add_option("--bg-jitter-lo", sim.bg_gain_jitter_db.lo)->capture_default_str();
    simulate->add_option("--bg-jitter-hi", sim.bg_gain_jitter_db.hi)->capture_default_str();
    simulate->add_option("--trim-threshold-db", sim.trim_threshold_db)->capture_default_str();
    simulate->add_option("--trim-frame-ms", sim.trim_frame_ms)->capture_default_str();
    simulate->add_option("--segment-len", sim.segment_len_s)->capture_default_str();
    simulate->add_option("--segment-hop", sim.segment_hop_s)->capture_default_str();
    simulate->add_option("--sample-rate", sim.sample_rate_hz)->capture_default_str();
    simulate->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    add_config(simulate);

    // mock-embed
    std::string me_manifest, me_out;
    std::size_t me_dim = 128;
    double me_sigma = 0.0, me_window = 1.0, me_hop = 1.0;
    std::uint64_t me_seed = 0;
    auto *mock = app.add_subcommand("mock-embed", "Write deterministic mock embedding stores");
    mock->add_option("--manifest", me_manifest);
    mock->add_option("--out", me_out, "Embedding directory");
    mock->add_option("--dim", me_dim)->capture_default_str()->check(CLI::PositiveNumber);
    mock->add_option("--sigma", me_sigma, "Noise norm")->capture_default_str();
    mock->add_option("--window", me_window)->capture_default_str();
    mock->add_option("--hop", me_hop)->capture_default_str();
    mock->add_option("--seed", me_seed)->capture_default_str();
    add_config(mock);

    // baseline
    std::string bl_manifest, bl_emb, bl_out;
    BaselineConfig bl;
    double bl_window = 0.0;
    auto *baseline = app.add_subcommand("baseline", "Run the sliding-window retriever");
    baseline->add_option("--manifest", bl_manifest);
    baseline->add_option("--emb-dir", bl_emb);
    baseline->add_option("--tau", bl.threshold, "Similarity threshold")->capture_default_str();
    baseline->add_option("--median", bl.median_len, "Median filter length (odd)")->capture_default_str();
    baseline->add_option("--window", bl_window, "Expected store window length (s)");
    baseline->add_option("--out", bl_out, "Predictions JSONL");
    add_config(baseline);

    // tune
    std::string tn_manifest, tn_emb, tn_out;
    std::vector<double> tau_grid = default_threshold_grid();
    std::vector<int> median_grid = default_median_grid();
    double tn_window = 0.0;
    auto *tune_cmd = app.add_subcommand("tune", "Grid-search baseline threshold and filter length");
    tune_cmd->add_option("--manifest", tn_manifest, "Validation manifest");
    tune_cmd->add_option("--emb-dir", tn_emb);
    tune_cmd->add_option("--tau-grid", tau_grid)->delimiter(',');
    tune_cmd->add_option("--median-grid", median_grid)->delimiter(',');
    tune_cmd->add_option("--window", tn_window, "Expected store window length (s)");
    tune_cmd->add_option("--out", tn_out, "Tuned baseline config JSON");
    add_config(tune_cmd);

    // eval
    std::string ev_preds, ev_manifest, ev_out, ev_csv;
    std::vector<double> r1_thetas{0.5, 0.7}, map_thetas{0.5, 0.75};
    auto *eval = app.add_subcommand("eval", "R1 / mAP / average mAP report");
    eval->add_option("--preds", ev_preds);
    eval->add_option("--manifest", ev_manifest);
    eval->add_option("--r1-thresholds", r1_thetas)->delimiter(',');
    eval->add_option("--map-thresholds", map_thetas)->delimiter(',');
    eval->add_option("--out", ev_out, "Report JSON (stdout when omitted)");
    eval->add_option("--csv", ev_csv, "Optional CSV with one row per metric and threshold");
    add_config(eval);

    // sed-eval
    std::string sd_preds, sd_manifest, sd_out, sd_sweep;
    double sd_frame = 1.0, sd_threshold = 0.5;
    auto *sed = app.add_subcommand("sed-eval", "Frame-level micro precision / recall / F1");
    sed->add_option("--preds", sd_preds, "Predictions JSONL, query = class label");
    sed->add_option("--manifest", sd_manifest, "Ground truth, query = class label");
    sed->add_option("--frame", sd_frame)->capture_default_str();
    sed->add_option("--threshold", sd_threshold, "Minimum confidence")->capture_default_str();
    sed->add_option("--sweep", sd_sweep, "Threshold sweep lo:hi:step");
    sed->add_option("--out", sd_out);
    add_config(sed);

    // loss
    std::string ls_fixture;
    auto *loss = app.add_subcommand("loss", "Evaluate a golden loss fixture");
    loss->add_option("--fixture", ls_fixture);

    // check
    std::string ck_manifest, ck_preds, ck_report, ck_store;
    auto *check = app.add_subcommand("check", "Validate output files");
    check->add_option("--manifest", ck_manifest);
    check->add_option("--preds", ck_preds);
    check->add_option("--report", ck_report);
    check->add_option("--store", ck_store);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        for (auto &[sub, path] : config_files) {
            if (sub->parsed() && !path.empty()) apply_config(sub, path);
        }
        if (simulate->parsed()) {
            require(simulate, {"--out", "--n"});
            validate(sim);
            ForegroundPool fg;
            BackgroundPool bg;
            if (n_items > 0) {
                if (fg_audio.empty() || fg_captions.empty() || bg_audio.empty()) {
                    throw InvalidArgument("--fg-audio, --fg-captions and --bg-audio are required "
                                          "when --n > 0");
                }
                fg = load_foreground_pool(fg_audio, fg_captions);
                bg = load_background_pool(bg_audio, sim);
                if (bg.segments.empty()) {
                    throw InvalidArgument("no background recording is at least " +
                                          theta_key(sim.segment_len_s) + " s long");
                }
            }
            const auto result = generate_dataset(fg, bg, n_items, sim, sim_out, threads);
            json summary = {{"items", result.summary.items},
                            {"moments", result.summary.moments},
                            {"interval_draws", result.summary.interval_draws},
                            {"mean_interval_s", result.summary.mean_interval_s}};
            out << summary.dump() << '\n';
        } else if (mock->parsed()) {
            require(mock, {"--manifest", "--out"});
            const auto items = read_manifest(me_manifest);
            const MockWorld world = make_mock_world(items, me_dim, me_sigma, me_seed);
            const fs::path dir = me_out;
            fs::create_directories(dir / "audio");
            fs::create_directories(dir / "text");
            for (const auto &item : items) {
                write_store(mock_embed_audio(world, item, me_window, me_hop),
                            audio_store_path(dir, item.audio_id));
            }
            for (const auto &label : world.labels) {
                write_store(mock_embed_text(world, label), text_store_path(dir, label));
            }
            out << json{{"audio_stores", items.size()}, {"text_stores", world.labels.size()}}.dump()
                << '\n';
        } else if (baseline->parsed()) {
            require(baseline, {"--manifest", "--emb-dir", "--out"});
            const auto items = read_manifest(bl_manifest);
            std::vector<PredictionRow> rows;
            for (const auto &qc : compute_curves(items, bl_emb, bl_window)) {
                BaselineConfig cfg = bl;
                cfg.window_s = qc.window_s;
                cfg.hop_s = qc.hop_s;
                validate(cfg);
                const auto bits = median_filter(binarize(qc.curve.sims, cfg.threshold), cfg.median_len);
                rows.push_back({qc.audio_id, qc.query,
                                extract_moments(bits, qc.curve.sims, cfg.hop_s, cfg.window_s,
                                                qc.curve.duration_s)});
            }
            ensure_parent(bl_out);
            write_predictions(bl_out, rows);
            out << json{{"queries", rows.size()}}.dump() << '\n';
        } else if (tune_cmd->parsed()) {
            require(tune_cmd, {"--manifest", "--emb-dir", "--out"});
            const auto items = read_manifest(tn_manifest);
            const auto curves = compute_curves(items, tn_emb, tn_window);
            if (curves.empty()) {
                throw InvalidArgument("validation manifest has no queries");
            }
            std::vector<TuningQuery> queries;
            for (const auto &qc : curves) queries.push_back(qc.curve);
            BaselineConfig base;
            base.window_s = curves.front().window_s;
            base.hop_s = curves.front().hop_s;
            const TuningResult best = tune(queries, tau_grid, median_grid, base);
            // Written as a `baseline --config` file.
            json cfg = {{"tau", best.config.threshold},
                        {"median", best.config.median_len},
                        {"window", best.config.window_s}};
            write_text(tn_out, cfg.dump(2) + "\n");
            out << json{{"tau", best.config.threshold},
                        {"median", best.config.median_len},
                        {"avg_map", best.avg_map}}
                       .dump()
                << '\n';
        } else if (eval->parsed()) {
            require(eval, {"--preds", "--manifest"});
            const auto items = read_manifest(ev_manifest);
            const auto preds = read_predictions(ev_preds);
            const auto joined = join_predictions(items, preds);
            if (joined.missing_predictions > 0) {
                warn(std::to_string(joined.missing_predictions) +
                     " query(ies) have no prediction row and count as misses");
            }
            const auto r1 = parse_threshold_list(r1_thetas, "R1 thresholds");
            const auto mp = parse_threshold_list(map_thetas, "mAP thresholds");
            const MetricReport report = evaluate(joined.results, r1, mp);
            const std::string text = report_to_json(report) + "\n";
            if (ev_out.empty()) {
                out << text;
            } else {
                write_text(ev_out, text);
            }
            if (!ev_csv.empty()) {
                std::ostringstream csv;
                csv << "metric,theta,value\n";
                for (const auto &[t, v] : report.r1_at) csv << "R1," << t << ',' << v << '\n';
                for (const auto &[t, v] : report.map_at) csv << "mAP," << t << ',' << v << '\n';
                csv << "mAP,avg," << report.avg_map << '\n';
                write_text(ev_csv, csv.str());
            }
        } else if (sed->parsed()) {
            require(sed, {"--preds", "--manifest"});
            if (!(sd_frame > 0.0)) throw InvalidArgument("--frame must be positive");
            const auto items = read_manifest(sd_manifest);
            const auto preds = read_predictions(sd_preds);
            std::map<std::string, std::vector<const PredictionRow *>> by_item;
            std::set<std::string> known;
            for (const auto &item : items) known.insert(item.audio_id);
            std::vector<std::string> unmatched;
            for (const auto &row : preds) {
                if (!known.contains(row.audio_id)) {
                    unmatched.push_back(row.audio_id + "\t" + row.query);
                    continue;
                }
                by_item[row.audio_id].push_back(&row);
            }
            if (!unmatched.empty()) {
                throw JoinError(std::to_string(unmatched.size()) +
                                    " prediction row(s) reference unknown audio",
                                std::move(unmatched));
            }
            json result;
            if (sd_sweep.empty()) {
                result = sed_json(sed_at(items, by_item, sd_threshold, sd_frame), sd_threshold);
            } else {
                double lo = 0, hi = 0, step = 0;
                char c1 = 0, c2 = 0;
                std::istringstream s(sd_sweep);
                if (!(s >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) ||
                    hi < lo) {
                    throw InvalidArgument("--sweep expects lo:hi:step with step > 0");
                }
                result = json::array();
                const auto steps = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
                for (long long i = 0; i <= steps; ++i) {
                    const double t = lo + static_cast<double>(i) * step;
                    result.push_back(sed_json(sed_at(items, by_item, t, sd_frame), t));
                }
            }
            const std::string text = result.dump(2) + "\n";
            if (sd_out.empty()) out << text;
            else write_text(sd_out, text);
        } else if (loss->parsed()) {
            require(loss, {"--fixture"});
            const LossFixture fx = read_loss_fixture(ls_fixture);
            const OverallLoss res = overall_loss(fx.preds, fx.gts, fx.weights);
            json pairs = json::array();
            for (const auto &[k, n] : res.assignment.pairs) pairs.push_back({k, n});
            bool ok = true;
            if (fx.expected_loss) ok = ok && std::abs(*fx.expected_loss - res.value) <= 1e-9;
            if (fx.expected_assignment) ok = ok && *fx.expected_assignment == res.assignment;
            json j = {{"loss", res.value},
                      {"score_term", res.score_term},
                      {"moment_term", res.moment_term},
                      {"assignment", pairs},
                      {"matches_expected", ok}};
            out << j.dump(2) << '\n';
            return ok ? kOk : kJoinError;
        } else if (check->parsed()) {
            json summary = json::object();
            if (!ck_manifest.empty()) summary["manifest_items"] = read_manifest(ck_manifest).size();
            if (!ck_preds.empty()) summary["prediction_rows"] = read_predictions(ck_preds).size();
            if (!ck_store.empty()) {
                const auto store = read_store(ck_store);
                summary["store"] = {{"rows", store.rows()}, {"dim", store.dim()},
                                    {"kind", to_string(store.kind())}};
            }
            if (!ck_report.empty()) {
                std::ifstream in(ck_report, std::ios::binary);
                if (!in) throw IoError("cannot open " + ck_report);
                json r;
                try {
                    in >> r;
                    for (const char *key : {"r1", "map", "avg_map", "num_queries"}) {
                        if (!r.contains(key)) throw IoError(std::string("report lacks ") + key);
                    }
                } catch (const json::exception &e) {
                    throw IoError(ck_report + ": " + e.what());
                }
                summary["report"] = "ok";
            }
            out << summary.dump() << '\n';
        }
    } catch (const JoinError &e) {
        err << "error: " << e.what() << '\n';
        for (const auto &u : e.unmatched()) err << "  unmatched: " << u << '\n';
        return kJoinError;
    } catch (const InvalidArgument &e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IoError &e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error &e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
    return kOk;
}

} // namespace amr::cli
