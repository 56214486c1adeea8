#include "camox/core.hpp"

#include <cmath>

namespace camox {

const char* to_string(Hand h) { return h == Hand::left ? "left" : "right"; }

Hand hand_from_string(const std::string& s) {
    if (s == "left") return Hand::left;
    if (s == "right") return Hand::right;
    throw DataError("unknown hand: '" + s + "' (expected left|right)");
}

void FrameSequence::validate() const {
    if (frames.empty()) throw DataError("frame sequence is empty");
    const std::size_t expected = pixel_count() * 3;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].size() != expected) {
            throw DataError("frame " + std::to_string(i) + " has " +
                            std::to_string(frames[i].size()) + " bytes, expected " +
                            std::to_string(expected));
        }
    }
}

void PpgRecording::validate() const {
    const std::size_t n = channel_means[0].size();
    for (int c = 0; c < 3; ++c) {
        if (channel_means[c].size() != n) {
            throw DataError("channel rows differ in length");
        }
        for (double v : channel_means[c]) {
            if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
                throw DataError("channel value out of [0, 255]: " + std::to_string(v));
            }
        }
    }
}

void GroundTruthSeries::validate() const {
    if (t_sec.size() != spo2.size()) throw DataError("ground truth columns differ in length");
    for (std::size_t i = 0; i < t_sec.size(); ++i) {
        if (!std::isfinite(spo2[i]) || spo2[i] < 0.0 || spo2[i] > 100.0) {
            throw DataError("spo2 out of [0, 100]: " + std::to_string(spo2[i]));
        }
        if (i > 0 && !(t_sec[i] > t_sec[i - 1])) {
            throw DataError("ground truth timestamps not strictly increasing at row " +
                            std::to_string(i));
        }
    }
}

}  // namespace camox
