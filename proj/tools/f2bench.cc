// Workload driver: load, warm-up and a timed run against one store.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "f2kv/bench/workload.h"

using namespace f2kv;
using namespace f2kv::bench;

int main(int argc, char** argv) {
  CLI::App app{"f2bench: YCSB-style workloads against the f2kv store"};

  std::string workload = "A";
  std::string dist = "zipfian";
  std::string report = "text";
  WorkloadSpec spec;
  BudgetSpec budget;
  uint64_t mem_budget = 0;

  app.add_option("--workload", workload, "A, B, C, D or F")->check(CLI::IsMember({"A", "B", "C", "D", "F"}));
  app.add_option("--dist", dist, "zipfian, hotspot:H, latest or uniform");
  app.add_option("--keys", spec.key_count, "Number of keys loaded");
  app.add_option("--ops", spec.op_count, "Timed operations");
  app.add_option("--warmup", spec.warmup_ops, "Untimed warm-up operations");
  app.add_option("--threads", spec.thread_count, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--value-size", spec.value_size, "Value bytes");
  app.add_option("--mem-budget", mem_budget, "In-memory bytes (default: 10% of the dataset)");
  app.add_option("--hot-disk", budget.hot_disk, "Hot log disk budget in bytes");
  app.add_option("--cold-disk", budget.cold_disk, "Cold log disk budget in bytes");
  app.add_option("--read-cache", budget.read_cache, "Read cache bytes (0 disables it)");
  app.add_option("--chunk-size", budget.chunk_size, "Cold index chunk bytes");
  app.add_option("--compaction-threads", budget.compaction_threads, "Threads per compaction pass");
  app.add_option("--seed", spec.seed, "Generator seed");
  app.add_option("--dir", budget.directory, "Directory for log files (default: in-memory devices)");
  app.add_option("--report", report, "text or json")->check(CLI::IsMember({"text", "json"}));
  app.add_flag("!--no-pin", spec.pin_threads, "Do not pin worker threads");
  CLI11_PARSE(app, argc, argv);

  try {
    spec.mix = parse_mix(workload);
    spec.distribution = DistributionSpec::parse(dist);
    spec.validate();
    budget.key_count = final_key_count(spec);
    budget.value_size = spec.value_size;
    budget.memory_budget = mem_budget != 0 ? mem_budget : spec.key_count * RecordLayout{spec.value_size}.size() / 10;
    if (!budget.directory.empty()) std::filesystem::create_directories(budget.directory);

    StoreConfig config = store_config_for_budget(budget);
    Store store{config};
    RunReport r = run(store, spec);
    std::cout << (report == "json" ? to_json(r) + "\n" : to_text(r));
  } catch (const std::exception& e) {
    std::cerr << "f2bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
