#include <catch_amalgamated.hpp>

#include <random>

#include "trackforge/maskcore.hpp"

using namespace trackforge;

namespace {

Bitmask random_mask(int w, int h, std::mt19937_64& g, double density = 0.4) {
    Bitmask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (static_cast<double>(g() % 1000) / 1000.0 < density) m.set(x, y);
    return m;
}

// Brute-force pixel-count IoU, independent of the library path.
double iou_oracle(const Bitmask& a, const Bitmask& b) {
    long long inter = 0, uni = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            bool pa = a.at(x, y), pb = b.at(x, y);
            inter += pa && pb;
            uni += pa || pb;
        }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace

TEST_CASE("iou basic cases") {
    Bitmask a(3, 1), b(3, 1);
    a.set(0, 0);
    a.set(1, 0);
    b.set(1, 0);
    b.set(2, 0);
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, b) == Catch::Approx(1.0 / 3.0));

    Bitmask c(3, 1);
    c.set(2, 0);
    Bitmask d(3, 1);
    d.set(0, 0);
    CHECK(iou(c, d) == 0.0);
}

TEST_CASE("iou of two empty masks is 1") {
    Bitmask a(4, 4), b(4, 4);
    CHECK(iou(a, b) == 1.0);
}

TEST_CASE("iou rejects dimension mismatch") {
    Bitmask a(3, 3), b(4, 3);
    CHECK_THROWS_AS(iou(a, b), std::invalid_argument);
}

TEST_CASE("iou symmetry and bounds on random masks") {
    std::mt19937_64 g(123);
    for (int it = 0; it < 200; ++it) {
        Bitmask a = random_mask(9, 7, g);
        Bitmask b = random_mask(9, 7, g);
        double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(ab == iou_oracle(a, b));
        CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("enclosing box") {
    Bitmask m(6, 6);
    CHECK_FALSE(enclosing_box(m).has_value());
    m.set(2, 3);
    CHECK(*enclosing_box(m) == Box{2, 3, 2, 3});
    m.set(1, 1);
    m.set(4, 2);
    CHECK(*enclosing_box(m) == Box{1, 1, 4, 3});
}

TEST_CASE("enclosing box is tight on random masks") {
    std::mt19937_64 g(7);
    for (int it = 0; it < 100; ++it) {
        Bitmask m = random_mask(12, 9, g, 0.15);
        auto box = enclosing_box(m);
        if (!box) {
            CHECK(m.empty());
            continue;
        }
        bool min_col = false, max_col = false, min_row = false, max_row = false;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m.at(x, y)) {
                    CHECK(box->contains(x, y));
                    min_col = min_col || x == box->x_min;
                    max_col = max_col || x == box->x_max;
                    min_row = min_row || y == box->y_min;
                    max_row = max_row || y == box->y_max;
                }
        CHECK(min_col);
        CHECK(max_col);
        CHECK(min_row);
        CHECK(max_row);
    }
}

TEST_CASE("split basic cases") {
    LabelMap l(4, 4);
    auto masks = split(l, 3);
    REQUIRE(masks.size() == 3);
    for (const auto& m : masks) CHECK(m.empty());

    l.set(2, 1, 2);
    masks = split(l, 3);
    CHECK(masks[0].empty());
    CHECK(masks[1].count() == 1);
    CHECK(masks[1].at(2, 1));
    CHECK(masks[2].empty());

    l.set(0, 0, 4);
    CHECK_THROWS_AS(split(l, 3), std::invalid_argument);
}

TEST_CASE("split pixel counts match a histogram oracle") {
    std::mt19937_64 g(99);
    LabelMap l(8, 8);
    std::vector<long long> hist(4, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            int id = static_cast<int>(g() % 4);
            l.set(x, y, id);
            ++hist[id];
        }
    auto masks = split(l, 3);
    for (int i = 1; i <= 3; ++i)
        CHECK(static_cast<long long>(masks[i - 1].count()) == hist[i]);
    // masks are pairwise disjoint and cover the labeled pixels
    long long total = 0;
    for (const auto& m : masks) total += static_cast<long long>(m.count());
    CHECK(total == 64 - hist[0]);
}

TEST_CASE("merge roundtrips disjoint masks and applies the tie rule") {
    std::mt19937_64 g(5);
    LabelMap l(10, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x) l.set(x, y, static_cast<int>(g() % 4));
    auto masks = split(l, 3);
    CHECK(merge(masks) == l);

    // overlap at one pixel: the higher index wins
    Bitmask a(3, 3), b(3, 3);
    a.set(1, 1);
    a.set(0, 0);
    b.set(1, 1);
    LabelMap merged = merge({a, b});
    CHECK(merged.at(1, 1) == 2);
    CHECK(merged.at(0, 0) == 1);

    CHECK_THROWS_AS(merge({}), std::invalid_argument);
}

TEST_CASE("resample nearest neighbor") {
    Bitmask m(2, 2);
    m.set(0, 0);
    m.set(0, 1);
    CHECK(resample(m, 2, 2) == m);

    Bitmask up = resample(m, 4, 2);
    // nearest-neighbor oracle per output pixel
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(up.at(x, y) == m.at(x * 2 / 4, y));
    CHECK(up.at(0, 0));
    CHECK(up.at(1, 0));
    CHECK_FALSE(up.at(2, 0));

    Bitmask full(5, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) full.set(x, y);
    Bitmask down = resample(full, 2, 2);
    CHECK(down.count() == 4);
}

TEST_CASE("rle encode basic forms") {
    Bitmask empty(4, 1);
    CHECK(rle_encode(empty).runs == std::vector<long long>{4});
    Bitmask full(4, 1);
    for (int x = 0; x < 4; ++x) full.set(x, 0);
    CHECK(rle_encode(full).runs == std::vector<long long>{0, 4});
}

TEST_CASE("rle roundtrip is exact over fuzzed masks") {
    std::mt19937_64 g(2024);
    for (int it = 0; it < 1000; ++it) {
        int w = 1 + static_cast<int>(g() % 16);
        int h = 1 + static_cast<int>(g() % 16);
        Bitmask m = random_mask(w, h, g, 0.5);
        RleMask r = rle_encode(m);
        long long sum = 0;
        for (long long run : r.runs) {
            CHECK(run >= 0);
            sum += run;
        }
        CHECK(sum == static_cast<long long>(w) * h);
        // canonical: no zero-length interior runs
        for (size_t i = 1; i < r.runs.size(); ++i) CHECK(r.runs[i] > 0);
        CHECK(rle_decode(r) == m);
        // text line roundtrip
        CHECK(rle_decode(rle_from_line(rle_to_line(r))) == m);
    }
}

TEST_CASE("rle decode rejects bad run sums") {
    RleMask r;
    r.width = 4;
    r.height = 1;
    r.runs = {3};
    CHECK_THROWS_AS(rle_decode(r), std::invalid_argument);
}

TEST_CASE("zero-size masks are rejected") {
    CHECK_THROWS_AS(Bitmask(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(LabelMap(1, 0), std::invalid_argument);
}
