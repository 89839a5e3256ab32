// Regenerates the committed fixtures:  make_fixture <dir>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ragscope/io.hpp"
#include "synthetic.hpp"

namespace {

bool write(const std::filesystem::path &path, const ragscope::ExperimentFile &file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << ragscope::serialize_experiment(file) << '\n';
  out.close();
  if (out.fail()) {
    std::cerr << "cannot write " << path << '\n';
    return false;
  }
  std::cout << "wrote " << path.string() << '\n';
  return true;
}

}  // namespace

int main(int argc, char **argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <output-dir>\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  bool ok = write(dir / "experiment.json", ragscope::synthetic::reference_experiment());
  ok = write(dir / "insight.json", ragscope::synthetic::insight_experiment().file) && ok;
  return ok ? 0 : 1;
}
