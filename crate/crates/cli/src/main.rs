use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use rgsvd::matrix_market;
use rgsvd::testmatrices::{make_minij, make_randsvd_spd, make_test_matrix, numerical_rank, TestMatrixSpec};
use rgsvd_cli::args::{Cli, Command, GenerateArgs};
use rgsvd_cli::output::{emit_results, Metadata};
use rgsvd_cli::{run_experiment, with_threads, CliError};

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let m = match args.kind.as_str() {
        "minij" => make_minij(args.n),
        "randsvd" => make_randsvd_spd(args.n, args.kappa, args.mode.parse()?, args.seed)?,
        name => {
            let kind = name.parse().map_err(|_| {
                CliError::Usage(format!("generate: unknown matrix '{name}'"))
            })?;
            let mut spec = TestMatrixSpec::new(kind, args.n, args.seed);
            spec.r = args.rank;
            make_test_matrix(&spec)?
        }
    };
    eprintln!("numerical rank: {}", numerical_rank(&m));
    match &args.out {
        Some(path) => matrix_market::write(&m, path)?,
        None => std::io::stdout()
            .lock()
            .write_all(matrix_market::to_string(&m).as_bytes())
            .map_err(|e| CliError::Output(e.to_string()))?,
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    if let Command::Generate(args) = &command {
        return generate(args);
    }
    let Some((cfg, out)) = command.into_config()? else {
        return Ok(());
    };
    let rows = with_threads(out.serial, || run_experiment(&cfg))??;
    emit_results(&rows, &Metadata::new(&cfg), out.format, out.path.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rgsvd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
