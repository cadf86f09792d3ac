#include <catch2/catch.hpp>

#include "mrscore/rng.hpp"
#include "mrscore/textprep.hpp"

#include <numeric>
#include <sstream>

using namespace mrscore;

TEST_CASE("tokenize basic rules") {
    CHECK(tokenize("No acute cardiopulmonary process.") ==
          TokenSequence{"no", "acute", "cardiopulmonary", "process"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("Heart size: normal (stable).") ==
          TokenSequence{"heart", "size", "normal", "stable"});
    CHECK(tokenize("X-RAY at 10:30, t2-weighted") ==
          TokenSequence{"x-ray", "at", "10:30", "t2-weighted"});
    CHECK(tokenize("   \t\n  ").empty());
    CHECK(tokenize("...").empty());
}

TEST_CASE("tokenize is idempotent through rejoin") {
    mrscore::Rng rng(7);
    const char* pieces[] = {"Heart", "size:", "(normal)", "x-ray", "NO.", "acute,", "2-3cm", "?!"};
    for (int trial = 0; trial < 200; ++trial) {
        std::ostringstream text;
        int len = static_cast<int>(rng.next_below(12));
        for (int i = 0; i < len; ++i) text << pieces[rng.next_below(8)] << ' ';
        TokenSequence once = tokenize(text.str());
        std::string joined;
        for (const auto& t : once) joined += t + ' ';
        CHECK(tokenize(joined) == once);
    }
}

TEST_CASE("ngrams counts") {
    TokenSequence aba{"a", "b", "a"};
    NgramCounts uni = ngrams(aba, 1);
    CHECK(uni.at("a") == 2);
    CHECK(uni.at("b") == 1);

    TokenSequence abc{"a", "b", "c"};
    NgramCounts tri = ngrams(abc, 3);
    REQUIRE(tri.size() == 1);
    CHECK(tri.begin()->second == 1);

    CHECK(ngrams(TokenSequence{"a", "b"}, 4).empty());
    CHECK_THROWS_AS(ngrams(abc, 0), std::invalid_argument);
}

TEST_CASE("ngram total count identity") {
    mrscore::Rng rng(11);
    const char* vocab[] = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 100; ++trial) {
        TokenSequence toks;
        std::size_t len = rng.next_below(9);
        for (std::size_t i = 0; i < len; ++i) toks.push_back(vocab[rng.next_below(4)]);
        for (std::size_t n = 1; n <= 5; ++n) {
            NgramCounts counts = ngrams(toks, n);
            long total = 0;
            for (const auto& [g, c] : counts) total += c;
            long expected = toks.size() >= n ? static_cast<long>(toks.size() - n + 1) : 0;
            CHECK(total == expected);
        }
    }
}

TEST_CASE("porter stems") {
    CHECK(stem("opacities") == "opac");
    CHECK(stem("lung") == "lung");
    CHECK(stem("") == "");
    // classic fixtures from the algorithm's published examples
    CHECK(stem("caresses") == "caress");
    CHECK(stem("ponies") == "poni");
    CHECK(stem("cats") == "cat");
    CHECK(stem("feed") == "feed");
    CHECK(stem("agreed") == "agr");
    CHECK(stem("effused") == "effu");
    CHECK(stem("plastered") == "plaster");
    CHECK(stem("motoring") == "motor");
    CHECK(stem("conflated") == "conflat");
    CHECK(stem("troubled") == "troubl");
    CHECK(stem("sized") == "size");
    CHECK(stem("hopping") == "hop");
    CHECK(stem("falling") == "fall");
    CHECK(stem("filing") == "file");
    CHECK(stem("happy") == "happi");
    CHECK(stem("relational") == "relat");
    CHECK(stem("conditional") == "condit");
    CHECK(stem("vietnamization") == "vietnam");
    CHECK(stem("triplicate") == "triplic");
    CHECK(stem("hopefulness") == "hope");
    CHECK(stem("goodness") == "good");
    CHECK(stem("revival") == "reviv");
    CHECK(stem("adjustable") == "adjust");
    CHECK(stem("effective") == "effect");
    CHECK(stem("probate") == "probat");
    CHECK(stem("controll") == "control");
    CHECK(stem("roll") == "roll");
}

TEST_CASE("stemming is idempotent over a fuzz vocabulary") {
    mrscore::Rng rng(42);
    const char* stems[] = {"opac",   "consolid", "effus", "cardi",  "pneum", "radi",
                           "gener",  "nation",   "rapid", "operat", "valid", "hospit"};
    const char* suffixes[] = {"",    "s",    "es",   "ed",    "ing",  "ity", "ities",
                              "ive", "ness", "ful",  "ation", "ally", "al",  "ized",
                              "izer", "ment", "ence", "ously", "y",    "ies"};
    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::string token = std::string(stems[rng.next_below(12)]) + suffixes[rng.next_below(20)];
        std::string once = stem(token);
        CHECK(stem(once) == once);
        ++checked;
    }
    CHECK(checked == 10000);
}
