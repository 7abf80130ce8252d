use clap::Parser;

fn main() -> std::process::ExitCode {
    bitraj::cli::main_with(bitraj::cli::Args::parse())
}
