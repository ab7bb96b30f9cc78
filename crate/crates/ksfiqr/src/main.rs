fn main() -> anyhow::Result<()> {
    ksfiqr::cli::run(std::env::args_os())
}
