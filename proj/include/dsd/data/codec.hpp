#pragma once

#include <memory>
#include <string>
#include <vector>

namespace dsd::data {

// Round-trip lossy compression behind a small port so tests can substitute
// their own implementation and the rest of the code never cares how encoding
// happens.
class CodecBackend {
 public:
  virtual ~CodecBackend() = default;
  virtual bool available() const = 0;
  /// Encode and decode at the given bitrate; returns the decoded waveform at
  /// the same sample rate. codec is one of "aac", "opus", "mp3".
  virtual std::vector<double> roundtrip(const std::vector<double>& samples, int sample_rate,
                                        const std::string& codec, int bitrate) = 0;
};

// Shells out to an ffmpeg-compatible transcoder named by the DSD_CODEC_BIN
// environment variable. available() is false when the variable is unset or
// the binary cannot be run, in which case callers fall back to the identity
// setting and say so.
std::unique_ptr<CodecBackend> make_process_codec_backend();

}  // namespace dsd::data
