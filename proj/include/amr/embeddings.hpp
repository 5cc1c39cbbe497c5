#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "amr/core.hpp"

namespace amr {

inline constexpr int kStoreFormatVersion = 1;

enum class StoreKind { AudioWindows, TextQuery };

std::string to_string(StoreKind kind);
StoreKind parse_store_kind(const std::string &s);

// Row-major matrix of float32 embeddings, one row per window (or a single
// pooled row for a text query).
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(StoreKind kind, std::size_t dim, std::vector<float> values,
                   double window_s, double hop_s);

    StoreKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t rows() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    double window_s() const { return window_s_; }
    double hop_s() const { return hop_s_; }
    const std::string &model() const { return model_; }
    void set_model(std::string model) { model_ = std::move(model); }

    std::span<const float> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    std::span<const float> values() const { return values_; }

    friend bool operator==(const EmbeddingStore &, const EmbeddingStore &) = default;

private:
    StoreKind kind_ = StoreKind::AudioWindows;
    std::size_t dim_ = 0;
    std::vector<float> values_;
    double window_s_ = 0.0;
    double hop_s_ = 1.0;
    std::string model_;
};

// Number of full windows of window_s at hop_s that fit in duration_s.
std::size_t window_count(double duration_s, double window_s, double hop_s);

// Mean over the rows of a frames x dim matrix.
std::vector<float> mean_pool(std::span<const float> frames, std::size_t dim);

double cosine(std::span<const float> a, std::span<const float> b);

// `path` names the payload (NAME.emb); the sidecar is NAME.emb.json.
void write_store(const EmbeddingStore &store, const std::filesystem::path &path);
EmbeddingStore read_store(const std::filesystem::path &path);

std::filesystem::path sidecar_path(const std::filesystem::path &path);

// Deterministic stand-in for a pretrained audio-text encoder. Each label maps
// to a seeded random unit vector; a window embeds the normalized sum of the
// labels active at its midpoint (or a per-item background vector when none
// is), plus isotropic Gaussian noise of total expected norm noise_sigma.
struct MockWorld {
    std::set<std::string> labels;
    std::size_t dim = 128;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

MockWorld make_mock_world(std::span<const AudioItem> items, std::size_t dim,
                          double noise_sigma, std::uint64_t seed);

std::vector<float> mock_label_vector(const MockWorld &world, const std::string &label);

EmbeddingStore mock_embed_audio(const MockWorld &world, const AudioItem &item,
                                double window_s, double hop_s);

// Throws InvalidArgument for labels the world does not know.
EmbeddingStore mock_embed_text(const MockWorld &world, const std::string &query);

// Stable 64-bit FNV-1a digest, used for seeding and query file names.
std::uint64_t fnv1a64(std::string_view bytes);

// Layout of an embedding directory:
//   DIR/audio/<audio_id>.emb
//   DIR/text/<16 hex digits of fnv1a64(query)>.emb
std::filesystem::path audio_store_path(const std::filesystem::path &dir,
                                       const std::string &audio_id);
std::filesystem::path text_store_path(const std::filesystem::path &dir,
                                      const std::string &query);

} // namespace amr
