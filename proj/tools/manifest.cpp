#include "manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "lgrpool/error.hpp"

namespace lgrpool::cli {

std::string git_blob_hash(std::string_view content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob.append(content);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string dataset_digest(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream content;
    content << in.rdbuf();
    out += git_blob_hash(content.str()) + "  " + f.filename().string() + "\n";
  }
  return out;
}

std::string RunManifest::content_hash() const {
  std::ostringstream text;
  text << "command " << command << "\n";
  text << "dataset " << dataset_name << "\n";
  text << dataset_digest(dataset_path);
  text << "seeds";
  for (auto s : seeds) text << ' ' << s;
  text << "\ngammas";
  for (auto g : gammas) text << ' ' << std::setprecision(17) << g;
  text << "\n" << format_config(config);
  return git_blob_hash(text.str());
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_to_json(config);
  j["dataset"] = {{"name", dataset_name}, {"path", dataset_path.string()}};
  j["seeds"] = seeds;
  if (!gammas.empty()) j["gammas"] = gammas;
  j["content_hash"] = content_hash();
  j["output_dir"] = output_dir.string();
  return j;
}

void claim_output_dir(const RunManifest& manifest, bool force) {
  const auto path = manifest.output_dir / "manifest.json";
  const auto json = manifest.to_json();
  if (std::filesystem::exists(path) && !force) {
    std::ifstream in(path);
    auto existing = nlohmann::json::parse(in, nullptr, false);
    const std::string theirs =
        existing.is_object() && existing.contains("content_hash")
            ? existing["content_hash"].get<std::string>()
            : std::string("<unreadable>");
    if (theirs != json["content_hash"].get<std::string>()) {
      throw ConfigError("output directory " + manifest.output_dir.string() +
                        " holds a different run (content hash " + theirs +
                        "); choose another --out or pass --force");
    }
  }
  std::filesystem::create_directories(manifest.output_dir);
  std::ofstream out(path);
  out << json.dump(2) << "\n";
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace lgrpool::cli
