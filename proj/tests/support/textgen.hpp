#pragma once

// Deterministic generator of report-shaped synthetic texts for tests:
// one history sentence, several findings with organ mentions, lesion
// keywords and medical terms, then an impression. Every corruption the
// mock backend knows is applicable to these texts.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "mrscore/llmgen.hpp"
#include "mrscore/rng.hpp"

namespace textgen {

inline std::string pick(mrscore::Rng& rng, const std::vector<std::string>& pool) {
    return pool[rng.next_below(pool.size())];
}

inline std::string synthetic_report(mrscore::Rng& rng) {
    static const std::vector<std::string> history = {
        "Clinical history notes prior cardiac surgery available for comparison",
        "Clinical history mentions previous chemotherapy and interval treatment",
        "Clinical history records prior valve surgery and ongoing treatment",
        "Clinical history describes a previous fall with imaging for comparison",
        "Clinical history documents prior admissions and completed treatment",
    };
    static const std::vector<std::string> findings = {
        "The heart is mildly enlarged with stable cardiomegaly",
        "The heart size remains at the upper limit of normal",
        "A small right pleural effusion layers posteriorly",
        "A trace left pleural effusion blunts the costophrenic angle",
        "Patchy opacities persist at the left lung base",
        "A rounded opacity in the right upper zone is unchanged",
        "Scattered calcified nodules are present in both lungs",
        "Mild interstitial edema involves both lung bases",
        "Linear atelectasis is seen behind the heart",
        "No focal consolidation is identified in either lung",
        "There is no pneumothorax on the current study",
        "The ribs are intact without acute fracture",
        "The mediastinal contour and aorta are unremarkable",
        "The diaphragm outlines smoothly on both sides",
        "Mild basal consolidation is improving compared with before",
        "No suspicious nodule has appeared in the interval",
    };
    static const std::vector<std::string> impressions = {
        "Impression: stable appearance without acute change",
        "Impression: findings as described with no new disease",
        "Impression: mild chronic changes and nothing acute",
        "Impression: improving study with residual basal findings",
        "Impression: no significant interval change in the chest",
    };

    std::string text = pick(rng, history) + ". ";
    std::size_t count = 4 + rng.next_below(3);
    std::vector<std::string> pool = findings;
    for (std::size_t i = 0; i < count && !pool.empty(); ++i) {
        std::size_t k = rng.next_below(pool.size());
        text += pool[k] + ". ";
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    text += pick(rng, impressions) + ".";
    return text;
}

inline std::vector<mrscore::GroundTruth> synthetic_corpus(std::size_t count,
                                                          std::uint64_t seed) {
    mrscore::Rng rng(seed);
    std::vector<mrscore::GroundTruth> gts;
    gts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "gt%04zu", i);
        gts.push_back({id, synthetic_report(rng)});
    }
    return gts;
}

}  // namespace textgen
