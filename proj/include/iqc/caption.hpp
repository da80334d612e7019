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

#pragma once

#include <array>
#include <string>

namespace iqc {

// Quality levels anchor the 3-level rating scale: good = 3, fair = 2,
// poor = 1.
enum class QualityLevel { Good = 0, Fair = 1, Poor = 2 };

enum class DistortionSituation {
    NoRegion = 0,  // no perceptibly distorted region
    OneRegion = 1, // one distorted region
    TwoRegions = 2,
    Global = 3,
};

enum class Recommendation {
    ShouldSave = 0,
    RecommendSave = 1,
    RecommendDiscard = 2,
    ShouldDiscard = 3,
};

const char* level_phrase(QualityLevel level);           // "good" / "fair" / "poor"
const char* situation_phrase(DistortionSituation s);    // e.g. "one distorted region"
const char* recommendation_phrase(Recommendation r);    // e.g. "should be saved"
const char* level_name(QualityLevel level);             // "Good" / "Fair" / "Poor"
const char* situation_name(DistortionSituation s);      // e.g. "CdistR1"
const char* recommendation_name(Recommendation r);      // e.g. "ShouldSave"

QualityLevel parse_level_name(const std::string& name);
DistortionSituation parse_situation_name(const std::string& name);
Recommendation parse_recommendation_name(const std::string& name);

// Maps a continuous score on the [1, 3] rating scale to a level:
// good at 2.5 and above, fair at [1.5, 2.5), poor below.  Scores outside
// [1, 3] are clamped with a warning; NaN is an argument error.
QualityLevel score_to_level(double score);

// Recommendation lookup by (level, situation).  Every table must be
// monotone: a worse level or a worse situation never yields a more
// favorable recommendation.
class RecommendationTable {
public:
    // Severity rule: level index plus situation index, 0 -> ShouldSave,
    // 1-2 -> RecommendSave, 3-4 -> RecommendDiscard, 5 -> ShouldDiscard.
    static RecommendationTable default_table();

    // JSON object {"<Level>,<Situation>": "<Recommendation>"} with all 12
    // cells present; violations of monotonicity are a configuration error.
    static RecommendationTable from_json_file(const std::string& path);

    Recommendation lookup(QualityLevel level, DistortionSituation situation) const;

private:
    std::array<Recommendation, 12> cells_ {};
    void validate() const;
};

// "A {level}-quality omnidirectional image with {situation}. It {rec}."
std::string render_caption(QualityLevel level, DistortionSituation situation,
                           Recommendation rec);

struct ParsedCaption {
    QualityLevel level;
    DistortionSituation situation;
    Recommendation rec;
};

// Inverse of render_caption; malformed text is an argument error.
ParsedCaption parse_caption(const std::string& text);

} // namespace iqc
