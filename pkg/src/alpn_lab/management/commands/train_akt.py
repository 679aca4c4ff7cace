"""
Django management command to train AKT-lite on an interaction-log file.
"""
from pathlib import Path

import pandas as pd

from alpn_lab.akt import AktLiteModel, next_response_accuracy, train_akt
from alpn_lab.exports import write_frame, write_json
from alpn_lab.logs import read_logs
from alpn_lab.nn import RngStream

from ._common import AlpnCommand

# Stream ids under the run seed.
STREAM_AKT_INIT = 20
STREAM_AKT_SPLIT = 21
STREAM_AKT_SHUFFLE = 22


class Command(AlpnCommand):
    """
    Usage:
        python manage.py train_akt data/logs/logs.csv --config configs/default.toml --out runs/akt
    """
    help = 'Train the AKT-lite knowledge-tracing model and report held-out accuracy'

    def add_arguments(self, parser):
        parser.add_argument('file', type=str, help='Log CSV written by gen_logs or any conforming source')
        self.add_common_arguments(parser, variant=False)

    def run(self, *args, **options):
        config = self.load_config(options)
        out = config.output_dir
        self.setup_error_logging(out)
        seed = config.run.seeds[0]
        catalog = config.build_catalog()
        logs = [log for _, log in sorted(read_logs(options['file'], catalog).items()) if len(log)]

        order = RngStream(seed, STREAM_AKT_SPLIT).permutation(len(logs))
        n_holdout = int(round(config.akt.holdout * len(logs)))
        n_holdout = min(n_holdout, max(len(logs) - 1, 0))
        holdout = [logs[i] for i in order[:n_holdout]]
        training = [logs[i] for i in order[n_holdout:]]

        self.banner("Train AKT-lite", {
            'Log file': options['file'],
            'Training students': len(training),
            'Held-out students': len(holdout),
            'Width': config.akt.d,
            'Epochs': config.akt.epochs,
            'Output': out,
        })

        model = AktLiteModel(catalog.J, config.akt.d, RngStream(seed, STREAM_AKT_INIT), window=config.akt.window)
        model, losses = train_akt(model, training, config.akt.train_hyper(), RngStream(seed, STREAM_AKT_SHUFFLE),
                                  progress=self.progress(options))

        checkpoint = model.save(Path(out) / 'akt.alpn', {'catalog': catalog.fingerprint(), 'seed': seed})
        write_frame(pd.DataFrame({'epoch': range(len(losses)), 'loss': losses}), Path(out) / 'akt_loss.csv')

        report = {'students_train': len(training), 'students_holdout': len(holdout),
                  'final_loss': losses[-1], 'checkpoint': str(checkpoint)}
        self.stdout.write(self.style.SUCCESS("\nAKT-lite Training Complete!"))
        self.stdout.write(f"  Loss:      {losses[0]:.4f} -> {losses[-1]:.4f}")
        if holdout:
            accuracy, majority = next_response_accuracy(model, holdout)
            report.update(accuracy=accuracy, majority=majority)
            self.stdout.write(f"  Held-out accuracy:  {accuracy:.4f}")
            self.stdout.write(f"  Majority baseline:  {majority:.4f}")
            style = self.style.SUCCESS if accuracy > majority else self.style.WARNING
            self.stdout.write(style(f"  Margin:             {100 * (accuracy - majority):+.2f} points"))
        write_json(report, Path(out) / 'akt_report.json')
        self.stdout.write(f"\nCheckpoint: {checkpoint}")
