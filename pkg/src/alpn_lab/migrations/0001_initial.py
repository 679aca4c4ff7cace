from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_dir', models.CharField(help_text='Directory holding history, checkpoints and curves', max_length=500)),
                ('config_hash', models.CharField(db_index=True, help_text='SHA-256 of the validated configuration', max_length=64)),
                ('variant', models.CharField(help_text='Agent variant: a2c, ppo or eppo', max_length=8)),
                ('seed', models.PositiveIntegerField()),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='running', max_length=16)),
                ('episodes_completed', models.PositiveIntegerField(default=0)),
                ('last_checkpoint', models.CharField(blank=True, default='', max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'verbose_name': 'Experiment run',
                'verbose_name_plural': 'Experiment runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['variant', 'seed'], name='variant_seed_idx')],
                'constraints': [models.UniqueConstraint(fields=('run_dir', 'variant', 'seed'), name='unique_run_variant_seed')],
            },
        ),
    ]
