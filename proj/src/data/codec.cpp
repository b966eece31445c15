#include "dsd/data/codec.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include "dsd/audio/wav.hpp"

namespace dsd::data {

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    const char* base = std::getenv("TMPDIR");
    fs::path root = base ? base : "/tmp";
    for (int attempt = 0; attempt < 100; ++attempt) {
      fs::path candidate = root / ("dsd-codec-" + std::to_string(std::rand()) + "-" +
                                   std::to_string(attempt));
      std::error_code ec;
      if (fs::create_directory(candidate, ec)) {
        path = candidate;
        return;
      }
    }
    throw std::runtime_error("codec: cannot create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

int run_quiet(const std::string& cmd) {
  return std::system((cmd + " >/dev/null 2>&1").c_str());
}

class ProcessCodecBackend final : public CodecBackend {
 public:
  ProcessCodecBackend() {
    const char* bin = std::getenv("DSD_CODEC_BIN");
    if (bin && *bin) {
      bin_ = bin;
      available_ = run_quiet(shell_quote(bin_) + " -version") == 0;
    }
  }

  bool available() const override { return available_; }

  std::vector<double> roundtrip(const std::vector<double>& samples, int sample_rate,
                                const std::string& codec, int bitrate) override {
    if (!available_) throw std::runtime_error("codec: backend not available");
    std::string encoder;
    std::string ext;
    if (codec == "aac") {
      encoder = "aac";
      ext = "m4a";
    } else if (codec == "opus") {
      encoder = "libopus";
      ext = "opus";
    } else if (codec == "mp3") {
      encoder = "libmp3lame";
      ext = "mp3";
    } else {
      throw std::runtime_error("codec: unknown codec " + codec);
    }

    TempDir tmp;
    const fs::path in_wav = tmp.path / "in.wav";
    const fs::path packed = tmp.path / ("packed." + ext);
    const fs::path out_wav = tmp.path / "out.wav";
    audio::write_wav_pcm16(in_wav.string(), samples, sample_rate);

    const std::string encode = shell_quote(bin_) + " -y -i " + shell_quote(in_wav.string()) +
                               " -c:a " + encoder + " -b:a " + std::to_string(bitrate) + " " +
                               shell_quote(packed.string());
    if (run_quiet(encode) != 0) throw std::runtime_error("codec: encode failed (" + codec + ")");
    const std::string decode = shell_quote(bin_) + " -y -i " + shell_quote(packed.string()) +
                               " -ar " + std::to_string(sample_rate) + " -ac 1 " +
                               shell_quote(out_wav.string());
    if (run_quiet(decode) != 0) throw std::runtime_error("codec: decode failed (" + codec + ")");

    audio::AudioClip decoded = audio::read_wav(out_wav.string());

    // Codecs add priming samples at the head and may round up the tail; pin
    // the result back to the input length.
    std::vector<double> out = std::move(decoded.samples);
    const size_t want = samples.size();
    if (out.size() > want) {
      const size_t lead = out.size() - want;
      out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lead / 2));
      out.resize(want);
    } else if (out.size() < want) {
      out.resize(want, 0.0);
    }
    return out;
  }

 private:
  std::string bin_;
  bool available_ = false;
};

}  // namespace

std::unique_ptr<CodecBackend> make_process_codec_backend() {
  return std::make_unique<ProcessCodecBackend>();
}

}  // namespace dsd::data
