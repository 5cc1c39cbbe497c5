#include "amr/embeddings.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "amr/rng.hpp"

namespace amr {

using nlohmann::json;

std::string to_string(StoreKind kind) {
    return kind == StoreKind::AudioWindows ? "audio-windows" : "text-query";
}

StoreKind parse_store_kind(const std::string &s) {
    if (s == "audio-windows") return StoreKind::AudioWindows;
    if (s == "text-query") return StoreKind::TextQuery;
    throw InvalidArgument("unknown store kind \"" + s + "\"");
}

EmbeddingStore::EmbeddingStore(StoreKind kind, std::size_t dim, std::vector<float> values,
                               double window_s, double hop_s)
    : kind_(kind), dim_(dim), values_(std::move(values)), window_s_(window_s),
      hop_s_(hop_s) {
    if (dim_ == 0) {
        throw InvalidArgument("embedding dim must be positive");
    }
    if (values_.size() % dim_ != 0) {
        throw InvalidArgument("value count is not a multiple of dim");
    }
    if (!(hop_s_ > 0.0) || !(window_s_ >= 0.0)) {
        throw InvalidArgument("window must be non-negative and hop positive");
    }
    if (kind_ == StoreKind::TextQuery && rows() != 1) {
        throw InvalidArgument("text-query store must hold exactly one row");
    }
    for (float v : values_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("embedding contains a non-finite value");
        }
    }
}

std::size_t window_count(double duration_s, double window_s, double hop_s) {
    if (!(hop_s > 0.0) || !(window_s > 0.0)) {
        throw InvalidArgument("window and hop must be positive");
    }
    if (duration_s + 1e-9 < window_s) {
        return 0;
    }
    return static_cast<std::size_t>(std::floor((duration_s - window_s) / hop_s + 1e-9)) + 1;
}

std::vector<float> mean_pool(std::span<const float> frames, std::size_t dim) {
    if (dim == 0 || frames.size() % dim != 0) {
        throw InvalidArgument("frame matrix shape does not match dim");
    }
    const std::size_t count = frames.size() / dim;
    if (count == 0) {
        throw InvalidArgument("cannot pool zero frames");
    }
    std::vector<double> acc(dim, 0.0);
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
            acc[d] += frames[t * dim + d];
        }
    }
    std::vector<float> out(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        out[d] = static_cast<float>(acc[d] / static_cast<double>(count));
    }
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("cosine of vectors with different dims (" +
                              std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvalidArgument("cosine of a zero vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::filesystem::path sidecar_path(const std::filesystem::path &path) {
    return std::filesystem::path(path.string() + ".json");
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
               (v >> 24);
    }
    return v;
}

} // namespace

void write_store(const EmbeddingStore &store, const std::filesystem::path &path) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + path.string());
        }
        for (float v : store.values()) {
            const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
            out.write(reinterpret_cast<const char *>(&bits), sizeof bits);
        }
        if (!out) {
            throw IoError("write failed: " + path.string());
        }
    }
    json side = {{"dim", store.dim()},
                 {"rows", store.rows()},
                 {"window_s", store.window_s()},
                 {"hop_s", store.hop_s()},
                 {"kind", to_string(store.kind())},
                 {"format_version", kStoreFormatVersion}};
    if (!store.model().empty()) {
        side["model"] = store.model();
    }
    std::ofstream out(sidecar_path(path), std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + sidecar_path(path).string());
    }
    out << side.dump() << '\n';
}

EmbeddingStore read_store(const std::filesystem::path &path) {
    const auto side_path = sidecar_path(path);
    std::ifstream side_in(side_path, std::ios::binary);
    if (!side_in) {
        throw IoError("cannot open sidecar " + side_path.string());
    }
    json side;
    try {
        side = json::parse(side_in);
    } catch (const json::exception &e) {
        throw IoError(side_path.string() + ": " + e.what());
    }
    std::size_t dim = 0, rows = 0;
    double window_s = 0.0, hop_s = 0.0;
    StoreKind kind{};
    try {
        dim = side.at("dim").get<std::size_t>();
        rows = side.at("rows").get<std::size_t>();
        window_s = side.at("window_s").get<double>();
        hop_s = side.at("hop_s").get<double>();
        kind = parse_store_kind(side.at("kind").get<std::string>());
    } catch (const std::exception &e) {  // json::exception or an unknown kind
        throw IoError(side_path.string() + ": " + e.what());
    }

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const auto size = static_cast<std::uintmax_t>(in.tellg());
    const std::uintmax_t expected = static_cast<std::uintmax_t>(rows) * dim * 4;
    if (size != expected) {
        std::ostringstream msg;
        msg << path.string() << ": expected rows·dim·4 = " << rows << "·" << dim
            << "·4 = " << expected << " bytes, found " << size;
        throw IoError(msg.str());
    }
    in.seekg(0);
    std::vector<float> values(rows * dim);
    for (auto &v : values) {
        std::uint32_t bits = 0;
        in.read(reinterpret_cast<char *>(&bits), sizeof bits);
        v = std::bit_cast<float>(to_little(bits));
    }
    if (!in) {
        throw IoError("read failed: " + path.string());
    }
    try {
        EmbeddingStore store(kind, dim, std::move(values), window_s, hop_s);
        if (auto it = side.find("model"); it != side.end() && it->is_string()) {
            store.set_model(it->get<std::string>());
        }
        return store;
    } catch (const InvalidArgument &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::filesystem::path audio_store_path(const std::filesystem::path &dir,
                                       const std::string &audio_id) {
    return dir / "audio" / (audio_id + ".emb");
}

std::filesystem::path text_store_path(const std::filesystem::path &dir,
                                      const std::string &query) {
    std::ostringstream name;
    name << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(query) << ".emb";
    return dir / "text" / name.str();
}

namespace {

std::vector<double> random_unit(std::uint64_t seed, std::size_t dim) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto &x : v) {
            x = normal(rng);
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto &x : v) x /= norm;
    return v;
}

std::vector<double> label_direction(const MockWorld &world, const std::string &label) {
    return random_unit(derive_seed(world.seed, fnv1a64("label:" + label)), world.dim);
}

} // namespace

MockWorld make_mock_world(std::span<const AudioItem> items, std::size_t dim,
                          double noise_sigma, std::uint64_t seed) {
    if (dim == 0) {
        throw InvalidArgument("mock dim must be positive");
    }
    if (!(noise_sigma >= 0.0)) {
        throw InvalidArgument("noise sigma must be non-negative");
    }
    MockWorld world;
    world.dim = dim;
    world.noise_sigma = noise_sigma;
    world.seed = seed;
    for (const auto &item : items) {
        for (const auto &a : item.annotations) {
            world.labels.insert(a.query);
        }
    }
    return world;
}

std::vector<float> mock_label_vector(const MockWorld &world, const std::string &label) {
    if (!world.labels.contains(label)) {
        throw InvalidArgument("label \"" + label + "\" is not part of the mock world");
    }
    const auto v = label_direction(world, label);
    return {v.begin(), v.end()};
}

EmbeddingStore mock_embed_audio(const MockWorld &world, const AudioItem &item,
                                double window_s, double hop_s) {
    const std::size_t rows = window_count(item.duration_s, window_s, hop_s);
    const std::size_t dim = world.dim;
    const auto background =
        random_unit(derive_seed(world.seed, fnv1a64("background:" + item.audio_id)), dim);

    std::vector<std::vector<double>> directions;
    directions.reserve(item.annotations.size());
    for (const auto &a : item.annotations) {
        directions.push_back(label_direction(world, a.query));
    }

    Rng rng(derive_seed(world.seed, fnv1a64("noise:" + item.audio_id)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise_scale = world.noise_sigma / std::sqrt(static_cast<double>(dim));

    std::vector<float> values;
    values.reserve(rows * dim);
    std::vector<double> acc(dim);
    for (std::size_t i = 0; i < rows; ++i) {
        const double mid = static_cast<double>(i) * hop_s + 0.5 * window_s;
        std::fill(acc.begin(), acc.end(), 0.0);
        std::size_t active = 0;
        for (std::size_t e = 0; e < item.annotations.size(); ++e) {
            const Span &s = item.annotations[e].span;
            if (s.start_s <= mid && mid <= s.end_s) {
                ++active;
                for (std::size_t d = 0; d < dim; ++d) acc[d] += directions[e][d];
            }
        }
        if (active == 0) {
            acc = background;
        }
        double norm = 1.0;
        if (active > 1) {
            norm = 0.0;
            for (double x : acc) norm += x * x;
            norm = std::sqrt(norm);
        }
        if (norm == 0.0) {
            // two opposite label vectors cancelled out
            acc = background;
            norm = 1.0;
        }
        for (std::size_t d = 0; d < dim; ++d) {
            double x = acc[d] / norm;
            if (world.noise_sigma > 0.0) {
                x += noise_scale * normal(rng);
            }
            values.push_back(static_cast<float>(x));
        }
    }
    EmbeddingStore store(StoreKind::AudioWindows, dim, std::move(values), window_s, hop_s);
    store.set_model("mock");
    return store;
}

EmbeddingStore mock_embed_text(const MockWorld &world, const std::string &query) {
    EmbeddingStore store(StoreKind::TextQuery, world.dim, mock_label_vector(world, query),
                         0.0, 1.0);
    store.set_model("mock");
    return store;
}

} // namespace amr
