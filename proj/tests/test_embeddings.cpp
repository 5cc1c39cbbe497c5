#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "amr/embeddings.hpp"
#include "test_util.hpp"

using namespace amr;

TEST_SUITE("embeddings") {

TEST_CASE("mean_pool examples") {
    const std::vector<float> one{1.0f, -2.0f, 3.5f};
    CHECK(mean_pool(one, 3) == one);

    const std::vector<float> opposite{1.0f, -2.0f, 3.5f, -1.0f, 2.0f, -3.5f};
    for (float v : mean_pool(opposite, 3)) CHECK(v == 0.0f);

    std::mt19937_64 rng(1);
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> m(15);
    for (auto &v : m) v = n(rng);
    const auto pooled = mean_pool(m, 3);
    for (std::size_t d = 0; d < 3; ++d) {
        double sum = 0.0;
        for (std::size_t t = 0; t < 5; ++t) sum += m[t * 3 + d];
        CHECK(pooled[d] == doctest::Approx(sum / 5.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(mean_pool(std::vector<float>{}, 3), InvalidArgument);
    CHECK_THROWS_AS(mean_pool(std::vector<float>{1, 2}, 3), InvalidArgument);
}

TEST_CASE("mean_pool is invariant to frame order") {
    const std::vector<float> a{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<float> b{7, 8, 9, 1, 2, 3, 4, 5, 6};
    CHECK(mean_pool(a, 3) == mean_pool(b, 3));
}

TEST_CASE("cosine examples and properties") {
    const std::vector<float> x{1, 0}, y{0, 1}, d{1, 1};
    CHECK(cosine(x, x) == 1.0);
    CHECK(cosine(x, y) == 0.0);
    CHECK(cosine(d, x) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK_THROWS_AS(cosine(x, std::vector<float>{0, 0}), InvalidArgument);
    CHECK_THROWS_AS(cosine(x, std::vector<float>{1, 0, 0}), InvalidArgument);

    std::mt19937_64 rng(2);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (int i = 0; i < 200; ++i) {
        std::vector<float> a(16), b(16), a2(16);
        for (auto &v : a) v = n(rng);
        for (auto &v : b) v = n(rng);
        for (std::size_t k = 0; k < 16; ++k) a2[k] = 4.0f * a[k];
        CHECK(cosine(a, a) == doctest::Approx(1.0));
        CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)).epsilon(1e-14));
        CHECK(cosine(a2, b) == doctest::Approx(cosine(a, b)).epsilon(1e-6));
        CHECK(std::abs(cosine(a, b)) <= 1.0 + 1e-12);
    }
}

TEST_CASE("window count") {
    CHECK(window_count(60.0, 1.0, 1.0) == 60);
    CHECK(window_count(60.0, 7.0, 1.0) == 54);
    CHECK(window_count(0.5, 1.0, 1.0) == 0);
    CHECK(window_count(62.0, 60.0, 1.0) == 3);
}

TEST_CASE("store round-trip is bit exact") {
    test::TempDir dir("store");
    std::mt19937_64 rng(3);
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> values(7 * 5);
    for (auto &v : values) v = n(rng);
    values[3] = -0.0f;
    values[4] = 1e-40f;  // subnormal
    EmbeddingStore store(StoreKind::AudioWindows, 5, values, 4.0, 1.0);
    store.set_model("unit-test");
    write_store(store, dir / "a.emb");
    const EmbeddingStore back = read_store(dir / "a.emb");
    CHECK(back == store);
    CHECK(std::signbit(back.values()[3]));
    CHECK(std::filesystem::file_size(dir / "a.emb") == 7 * 5 * 4);

    EmbeddingStore text(StoreKind::TextQuery, 5, std::vector<float>(values.begin(), values.begin() + 5),
                        0.0, 1.0);
    write_store(text, dir / "t.emb");
    CHECK(read_store(dir / "t.emb") == text);
}

TEST_CASE("store payload is little-endian float32") {
    test::TempDir dir("endian");
    EmbeddingStore store(StoreKind::TextQuery, 2, {1.0f, -2.0f}, 0.0, 1.0);
    write_store(store, dir / "q.emb");
    const std::string raw = test::slurp(dir / "q.emb");
    const unsigned char expected[] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    REQUIRE(raw.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(static_cast<unsigned char>(raw[i]) == expected[i]);
    const std::string side = test::slurp(dir / "q.emb.json");
    CHECK(side.find("\"kind\":\"text-query\"") != std::string::npos);
    CHECK(side.find("\"dim\":2") != std::string::npos);
}

TEST_CASE("truncated or mismatched store is rejected") {
    test::TempDir dir("trunc");
    EmbeddingStore store(StoreKind::AudioWindows, 4, std::vector<float>(12, 0.5f), 1.0, 1.0);
    write_store(store, dir / "a.emb");
    std::filesystem::resize_file(dir / "a.emb", 40);
    try {
        read_store(dir / "a.emb");
        FAIL("expected an error");
    } catch (const IoError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("expected rows·dim·4") != std::string::npos);
        CHECK(msg.find("3·4·4 = 48 bytes, found 40") != std::string::npos);
    }
    CHECK_THROWS_AS(read_store(dir / "missing.emb"), IoError);

    std::ofstream(dir / "b.emb.json") << R"({"dim":4,"rows":1,"window_s":1,"hop_s":1,"kind":"weird"})";
    std::ofstream(dir / "b.emb", std::ios::binary) << std::string(16, '\0');
    CHECK_THROWS_AS(read_store(dir / "b.emb"), IoError);
}

TEST_CASE("store invariants") {
    CHECK_THROWS_AS(EmbeddingStore(StoreKind::TextQuery, 2, {1, 2, 3, 4}, 0.0, 1.0),
                    InvalidArgument);
    CHECK_THROWS_AS(EmbeddingStore(StoreKind::AudioWindows, 2, {1, NAN}, 1.0, 1.0),
                    InvalidArgument);
    CHECK_THROWS_AS(EmbeddingStore(StoreKind::AudioWindows, 2, {1, 2}, 1.0, 0.0),
                    InvalidArgument);
    CHECK_THROWS_AS(EmbeddingStore(StoreKind::AudioWindows, 2, {1, 2, 3}, 1.0, 1.0),
                    InvalidArgument);
}

TEST_CASE("mock embedder") {
    AudioItem item{"clip", "clip.wav", 60.0, {{"a dog barks", {10.0, 30.0}}, {"rain", {35.0, 50.0}}}};
    const std::vector<AudioItem> items{item};
    const MockWorld world = make_mock_world(items, 128, 0.0, 42);
    const EmbeddingStore audio = mock_embed_audio(world, item, 1.0, 1.0);
    const EmbeddingStore dog = mock_embed_text(world, "a dog barks");
    REQUIRE(audio.rows() == 60);
    CHECK(dog.kind() == StoreKind::TextQuery);

    // window 15 covers [15, 16], inside the dog event
    CHECK(cosine(audio.row(15), dog.row(0)) == doctest::Approx(1.0).epsilon(1e-12));
    // background windows are nearly orthogonal to every label at D = 128
    for (std::size_t i : {0u, 5u, 31u, 55u}) {
        CHECK(std::abs(cosine(audio.row(i), dog.row(0))) < 3.0 / std::sqrt(128.0));
    }
    CHECK_THROWS_AS(mock_embed_text(world, "unheard label"), InvalidArgument);

    const EmbeddingStore again = mock_embed_audio(world, item, 1.0, 1.0);
    CHECK(again == audio);
}

TEST_CASE("mock background similarity concentrates near zero") {
    // Empirical check of |cos| <= 3/sqrt(D) between independent random unit
    // vectors, over many labels.
    std::vector<AudioItem> items;
    for (int i = 0; i < 200; ++i) {
        items.push_back({"bg" + std::to_string(i), "", 5.0, {{"label " + std::to_string(i), {4.0, 5.0}}}});
    }
    const MockWorld world = make_mock_world(items, 128, 0.0, 9);
    int violations = 0;
    double max_abs = 0.0;
    for (const auto &item : items) {
        const auto audio = mock_embed_audio(world, item, 1.0, 1.0);
        const auto text = mock_embed_text(world, item.annotations[0].query);
        const double c = std::abs(cosine(audio.row(0), text.row(0)));
        max_abs = std::max(max_abs, c);
        if (c > 3.0 / std::sqrt(128.0)) ++violations;
    }
    // about 0.3% of draws exceed three standard deviations
    CHECK(violations <= 4);
    CHECK(max_abs < 0.5);
}

TEST_CASE("mock noise has the configured norm") {
    AudioItem item{"n", "", 400.0, {{"tone", {0.0, 400.0}}}};
    const std::vector<AudioItem> items{item};
    const MockWorld world = make_mock_world(items, 128, 0.3, 5);
    const auto audio = mock_embed_audio(world, item, 1.0, 1.0);
    const auto label = mock_label_vector(world, "tone");
    double sq = 0.0;
    for (std::size_t r = 0; r < audio.rows(); ++r) {
        for (std::size_t d = 0; d < 128; ++d) {
            const double e = audio.row(r)[d] - label[d];
            sq += e * e;
        }
    }
    CHECK(std::sqrt(sq / static_cast<double>(audio.rows())) == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("embedding directory layout") {
    CHECK(audio_store_path("emb", "item_000001") == std::filesystem::path("emb/audio/item_000001.emb"));
    const auto p = text_store_path("emb", "a dog barks");
    CHECK(p.parent_path() == std::filesystem::path("emb/text"));
    CHECK(p.filename().string().size() == 16 + 4);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

} // TEST_SUITE

TEST_SUITE("embeddings") {

TEST_CASE("store written by an external numpy exporter loads") {
    const EmbeddingStore g = read_store(std::filesystem::path(AMR_FIXTURE_DIR) / "stores" / "golden.emb");
    CHECK(g.kind() == StoreKind::AudioWindows);
    CHECK(g.model() == "golden");
    REQUIRE(g.rows() == 3);
    REQUIRE(g.dim() == 4);
    const std::vector<float> expected{1.0f, -2.0f, 0.25f, 3.5f, 0.0f, 1e-3f, 0.5f, -0.75f,
                                      -1.5f, 2.0f, 4.0f, 0.125f};
    CHECK(std::equal(g.values().begin(), g.values().end(), expected.begin(), expected.end()));
}

} // TEST_SUITE
