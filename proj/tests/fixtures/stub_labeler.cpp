// Deterministic stand-in for a depth predictor.
//
//   stub_labeler <input_list> <output_dir> [--fail-on ID]... [--exit-code N]
//
// Reads "<id>\t<image_path>" lines and writes <output_dir>/<id>.pfm, a
// 16x8 map whose constant depth is 1 + (byte sum of the image file) % 50.
// Ids given with --fail-on get no output. A nonzero --exit-code makes the
// whole run fail after printing a message.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <string>

#include "panodepth/io.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: stub_labeler <input_list> <output_dir> [--fail-on ID]... [--exit-code N]\n";
    return 64;
  }
  std::set<std::string> fail_on;
  int exit_code = 0;
  for (int i = 3; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--fail-on") fail_on.insert(argv[i + 1]);
    else if (flag == "--exit-code") exit_code = std::stoi(argv[i + 1]);
  }
  if (exit_code != 0) {
    std::cerr << "stub_labeler: simulated crash\n";
    return exit_code;
  }
  const std::filesystem::path out_dir = argv[2];
  std::ifstream list(argv[1]);
  std::string line;
  while (std::getline(list, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const std::string id = line.substr(0, tab);
    const std::string image = line.substr(tab + 1);
    if (fail_on.count(id)) {
      std::cerr << "stub_labeler: refusing " << id << '\n';
      continue;
    }
    std::ifstream in(image, std::ios::binary);
    unsigned long sum = 0;
    for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) sum += static_cast<unsigned char>(*it);
    const float depth = 1.0f + static_cast<float>(sum % 50);
    panodepth::io::write_pfm(panodepth::DepthMap::constant(16, 8, depth), out_dir / (id + ".pfm"));
  }
  return 0;
}
