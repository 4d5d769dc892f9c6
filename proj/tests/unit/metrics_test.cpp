#include <doctest.h>

#include <random>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "terse/error.hpp"
#include "terse/metrics.hpp"

using namespace terse;

namespace {

std::string words(std::size_t n, const std::string& w = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + w;
    return s;
}

corpus toy() {
    std::vector<query_record> v;
    auto add = [&](std::string id, std::string answer) {
        query_record r;
        r.id = std::move(id);
        r.dataset = "toy";
        r.question = "q?";
        r.target_answer = std::move(answer);
        v.push_back(r);
    };
    add("a", "the cat sat on the mat");
    add("b", "");
    add("c", "one two");
    return corpus(std::move(v));
}

generation_record gen(std::string id, std::string text) {
    generation_record g;
    g.id = std::move(id);
    g.model = "m";
    g.strategy = "brief";
    g.response_text = std::move(text);
    return g;
}

}  // namespace

TEST_CASE("rouge-l worked examples") {
    auto s = rouge_l("the cat was on the mat", "the cat sat on the mat");
    CHECK(s.precision == doctest::Approx(5.0 / 6));
    CHECK(s.recall == doctest::Approx(5.0 / 6));
    CHECK(s.f1 == doctest::Approx(5.0 / 6));

    CHECK(rouge_l("The Cat", "the cat").f1 == 1.0);
    CHECK(rouge_l("", "x") == rouge_score{});
    CHECK(rouge_l("x", "") == rouge_score{});
    CHECK(rouge_l("a b", "c d") == rouge_score{});
    // Punctuation is a token.
    CHECK(rouge_l("Paris.", "Paris").precision == doctest::Approx(0.5));
}

TEST_CASE("property: rouge-l agrees with the brute-force oracle") {
    std::mt19937 rng(17);
    const std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 500; ++trial) {
        auto draw = [&] {
            std::vector<std::string> v(rng() % 21);
            for (auto& t : v) t = vocab[rng() % vocab.size()];
            return v;
        };
        auto x = draw(), y = draw();
        auto got = rouge_l_tokens(x, y);
        auto want = oracle::rouge_l(x, y);
        CHECK(lcs_length(x, y) == oracle::lcs(x, y));
        CHECK(got.precision == doctest::Approx(want.p).epsilon(1e-12));
        CHECK(got.recall == doctest::Approx(want.r).epsilon(1e-12));
        CHECK(got.f1 == doctest::Approx(want.f).epsilon(1e-12));
        CHECK(rouge_l_tokens(x, x).f1 == (x.empty() ? 0.0 : 1.0));
        CHECK(got.f1 >= 0.0);
        CHECK(got.f1 <= 1.0);
    }
}

TEST_CASE("length ratio") {
    CHECK(length_ratio(20, 10) == 2.0);
    CHECK(length_ratio(0, 10) == 0.0);
    CHECK_FALSE(length_ratio(5, 0).has_value());
}

TEST_CASE("reasoning fraction") {
    CHECK(reasoning_fraction("<think>" + words(648) + "</think>" + words(352)) == 0.648);
    CHECK(reasoning_fraction("") == 0.0);
    CHECK(reasoning_fraction(words(10)) == 0.0);
    CHECK(reasoning_fraction("<think>" + words(4)) == 1.0);  // unclosed runs to the end
    CHECK(reasoning_fraction("x </think> y <think> a b </think> z") == doctest::Approx(2.0 / 5));
    CHECK(reasoning_fraction("[[a b]] c d", "[[", "]]") == 0.5);
    CHECK_THROWS(reasoning_fraction("x", "", "</think>"));
    CHECK_THROWS(reasoning_fraction("x", "<t>", "<t>"));
}

TEST_CASE("score_run") {
    auto data = toy();
    std::vector<generation_record> run = {gen("a", "the cat was on the mat"), gen("b", "anything"),
                                          gen("c", "<think>hmm</think> one two")};
    run.push_back(gen("c", ""));
    run.back().error = "http 500";
    std::map<std::string, double> energy = {{"a", 1.5}};
    auto scored = score_run(run, data, &energy);
    REQUIRE(scored.cards.size() == 4);
    CHECK(scored.excluded == 1);

    const auto& a = scored.cards[0];
    CHECK(a.dataset == "toy");
    CHECK(a.generated_length == 6);
    CHECK(a.target_length == 6);
    CHECK(a.length_ratio == 1.0);
    CHECK(a.energy_mwh == 1.5);
    CHECK_FALSE(a.reasoning_fraction.has_value());

    CHECK_FALSE(scored.cards[1].length_ratio.has_value());
    CHECK_FALSE(scored.cards[1].energy_mwh.has_value());
    CHECK(scored.cards[2].reasoning_fraction == doctest::Approx(1.0 / 3));
    CHECK_FALSE(scored.cards[3].ok());

    run.push_back(gen("zzz", "x"));
    CHECK_THROWS_AS(score_run(run, data), unknown_record_id);
}

TEST_CASE("score file round trip") {
    testing::temp_dir dir;
    auto scored = score_run({gen("a", "the cat"), gen("b", "x")}, toy());
    score_card failed;
    failed.id = "c";
    failed.model = "m";
    failed.dataset = "toy";
    failed.strategy = "brief";
    failed.error = "timeout";
    scored.cards.push_back(failed);
    scored.cards[0].energy_mwh = 0.25;
    scored.cards[0].reasoning_fraction = 0.5;
    write_scores(scored.cards, dir / "s.jsonl");
    auto back = load_scores(dir / "s.jsonl");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(serialize_score_card(back[i]) == serialize_score_card(scored.cards[i]));
        CHECK(back[i].rouge == scored.cards[i].rouge);
        CHECK(back[i].length_ratio == scored.cards[i].length_ratio);
        CHECK(back[i].error == scored.cards[i].error);
    }
    CHECK_THROWS_AS(parse_score_card("{\"id\":1}", 3), parse_error);
}
