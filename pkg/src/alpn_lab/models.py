from django.db import models


class ExperimentRun(models.Model):
    """
    Registry entry for one training run (one variant and one seed).

    Artifacts live on disk under ``run_dir``; this row only records where
    they are and how far the run got.
    """
    STATUS_RUNNING = 'running'
    STATUS_COMPLETED = 'completed'
    STATUS_FAILED = 'failed'
    STATUS_CHOICES = [
        (STATUS_RUNNING, 'Running'),
        (STATUS_COMPLETED, 'Completed'),
        (STATUS_FAILED, 'Failed'),
    ]

    run_dir = models.CharField(
        max_length=500,
        help_text="Directory holding history, checkpoints and curves"
    )
    config_hash = models.CharField(
        max_length=64,
        db_index=True,
        help_text="SHA-256 of the validated configuration"
    )
    variant = models.CharField(
        max_length=8,
        help_text="Agent variant: a2c, ppo or eppo"
    )
    seed = models.PositiveIntegerField()
    status = models.CharField(
        max_length=16,
        choices=STATUS_CHOICES,
        default=STATUS_RUNNING,
    )
    episodes_completed = models.PositiveIntegerField(default=0)
    last_checkpoint = models.CharField(max_length=500, blank=True, default='')
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = 'Experiment run'
        verbose_name_plural = 'Experiment runs'
        constraints = [
            models.UniqueConstraint(fields=['run_dir', 'variant', 'seed'], name='unique_run_variant_seed'),
        ]
        indexes = [
            models.Index(fields=['variant', 'seed'], name='variant_seed_idx'),
        ]

    def __str__(self) -> str:
        return f"{self.variant} seed={self.seed} ({self.status})"
