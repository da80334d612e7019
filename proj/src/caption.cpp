// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "iqc/caption.hpp"

#include "iqc/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace iqc {

namespace {

constexpr const char* kLevelPhrase[3] = {"good", "fair", "poor"};
constexpr const char* kLevelName[3] = {"Good", "Fair", "Poor"};
constexpr const char* kSituationPhrase[4] = {
    "no perceptibly distorted region",
    "one distorted region",
    "two distorted regions",
    "global distortion",
};
constexpr const char* kSituationName[4] = {"CnoDist", "CdistR1", "CdistR2", "CdistGl"};
constexpr const char* kRecPhrase[4] = {
    "should be saved",
    "is recommended to be saved",
    "is recommended to be discarded",
    "should be discarded",
};
constexpr const char* kRecName[4] = {"ShouldSave", "RecommendSave", "RecommendDiscard",
                                     "ShouldDiscard"};

} // namespace

const char* level_phrase(QualityLevel level) { return kLevelPhrase[static_cast<int>(level)]; }
const char* situation_phrase(DistortionSituation s) { return kSituationPhrase[static_cast<int>(s)]; }
const char* recommendation_phrase(Recommendation r) { return kRecPhrase[static_cast<int>(r)]; }
const char* level_name(QualityLevel level) { return kLevelName[static_cast<int>(level)]; }
const char* situation_name(DistortionSituation s) { return kSituationName[static_cast<int>(s)]; }
const char* recommendation_name(Recommendation r) { return kRecName[static_cast<int>(r)]; }

QualityLevel parse_level_name(const std::string& name)
{
    for (int i = 0; i < 3; ++i)
        if (name == kLevelName[i])
            return static_cast<QualityLevel>(i);
    throw std::invalid_argument("unknown quality level '" + name + "'");
}

DistortionSituation parse_situation_name(const std::string& name)
{
    for (int i = 0; i < 4; ++i)
        if (name == kSituationName[i])
            return static_cast<DistortionSituation>(i);
    throw std::invalid_argument("unknown distortion situation '" + name + "'");
}

Recommendation parse_recommendation_name(const std::string& name)
{
    for (int i = 0; i < 4; ++i)
        if (name == kRecName[i])
            return static_cast<Recommendation>(i);
    throw std::invalid_argument("unknown recommendation '" + name + "'");
}

QualityLevel score_to_level(double score)
{
    require_arg(!std::isnan(score), "quality score is NaN");
    if (score < 1.0 || score > 3.0) {
        warn("quality score " + std::to_string(score) + " outside [1, 3]; clamping");
        score = std::clamp(score, 1.0, 3.0);
    }
    if (score >= 2.5)
        return QualityLevel::Good;
    if (score >= 1.5)
        return QualityLevel::Fair;
    return QualityLevel::Poor;
}

RecommendationTable RecommendationTable::default_table()
{
    RecommendationTable t;
    for (int level = 0; level < 3; ++level)
        for (int sit = 0; sit < 4; ++sit) {
            const int severity = level + sit;
            Recommendation rec = Recommendation::ShouldDiscard;
            if (severity == 0)
                rec = Recommendation::ShouldSave;
            else if (severity <= 2)
                rec = Recommendation::RecommendSave;
            else if (severity <= 4)
                rec = Recommendation::RecommendDiscard;
            t.cells_[level * 4 + sit] = rec;
        }
    t.validate();
    return t;
}

void RecommendationTable::validate() const
{
    for (int level = 0; level < 3; ++level)
        for (int sit = 1; sit < 4; ++sit)
            require_state(static_cast<int>(cells_[level * 4 + sit])
                              >= static_cast<int>(cells_[level * 4 + sit - 1]),
                          "recommendation table not monotone in situation for level "
                              + std::string(kLevelName[level]));
    for (int sit = 0; sit < 4; ++sit)
        for (int level = 1; level < 3; ++level)
            require_state(static_cast<int>(cells_[level * 4 + sit])
                              >= static_cast<int>(cells_[(level - 1) * 4 + sit]),
                          "recommendation table not monotone in level for situation "
                              + std::string(kSituationName[sit]));
}

RecommendationTable RecommendationTable::from_json_file(const std::string& path)
{
    std::ifstream is(path);
    require_state(is.good(), "cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    require_state(j.is_object(), path + ": recommendation table must be a JSON object");
    RecommendationTable t;
    std::array<bool, 12> seen {};
    for (const auto& [key, value] : j.items()) {
        const std::size_t comma = key.find(',');
        require_state(comma != std::string::npos, path + ": bad cell key '" + key + "'");
        QualityLevel level;
        DistortionSituation sit;
        Recommendation rec;
        try {
            level = parse_level_name(key.substr(0, comma));
            sit = parse_situation_name(key.substr(comma + 1));
            require_state(value.is_string(), "value must be a string");
            rec = parse_recommendation_name(value.get<std::string>());
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": cell '" + key + "': " + e.what());
        }
        const int idx = static_cast<int>(level) * 4 + static_cast<int>(sit);
        require_state(!seen[idx], path + ": duplicate cell '" + key + "'");
        seen[idx] = true;
        t.cells_[idx] = rec;
    }
    for (int i = 0; i < 12; ++i)
        require_state(seen[i], path + ": missing recommendation cells");
    t.validate();
    return t;
}

Recommendation RecommendationTable::lookup(QualityLevel level, DistortionSituation situation) const
{
    return cells_[static_cast<int>(level) * 4 + static_cast<int>(situation)];
}

std::string render_caption(QualityLevel level, DistortionSituation situation, Recommendation rec)
{
    std::string out = "A ";
    out += level_phrase(level);
    out += "-quality omnidirectional image with ";
    out += situation_phrase(situation);
    out += ". It ";
    out += recommendation_phrase(rec);
    out += ".";
    return out;
}

ParsedCaption parse_caption(const std::string& text)
{
    const std::string quality_sep = "-quality omnidirectional image with ";
    const std::string it_sep = ". It ";
    require_arg(text.size() >= 2 && text.compare(0, 2, "A ") == 0,
                "caption does not start with 'A '");
    require_arg(!text.empty() && text.back() == '.', "caption does not end with '.'");
    const std::size_t qpos = text.find(quality_sep);
    require_arg(qpos != std::string::npos, "caption lacks the quality clause");
    const std::size_t ipos = text.find(it_sep, qpos);
    require_arg(ipos != std::string::npos, "caption lacks the recommendation clause");
    const std::string level_word = text.substr(2, qpos - 2);
    const std::string situation_words = text.substr(qpos + quality_sep.size(),
                                                    ipos - qpos - quality_sep.size());
    const std::string rec_words = text.substr(ipos + it_sep.size(),
                                              text.size() - 1 - ipos - it_sep.size());
    ParsedCaption out {};
    bool found = false;
    for (int i = 0; i < 3; ++i)
        if (level_word == kLevelPhrase[i]) {
            out.level = static_cast<QualityLevel>(i);
            found = true;
        }
    require_arg(found, "unknown quality wording '" + level_word + "'");
    found = false;
    for (int i = 0; i < 4; ++i)
        if (situation_words == kSituationPhrase[i]) {
            out.situation = static_cast<DistortionSituation>(i);
            found = true;
        }
    require_arg(found, "unknown situation wording '" + situation_words + "'");
    found = false;
    for (int i = 0; i < 4; ++i)
        if (rec_words == kRecPhrase[i]) {
            out.rec = static_cast<Recommendation>(i);
            found = true;
        }
    require_arg(found, "unknown recommendation wording '" + rec_words + "'");
    return out;
}

} // namespace iqc
