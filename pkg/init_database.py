#!/usr/bin/env python3
"""
Database Initialization Script for dlab
Creates the run registry and stores the canonical bound presets
"""

from src.main import app
from src.models.run import RunRecord, db
from src.services.lab import SEED_PRESETS, seed_preset_runs


def main():
    """Main initialization function"""
    print("🚀 Initializing dlab run registry...")

    with app.app_context():
        print("📋 Creating database tables...")
        db.create_all()

        existing = RunRecord.query.filter(RunRecord.subcommand == 'bound').count()
        if existing > 0:
            print(f"⚠️  Registry already holds {existing} bound runs. Skipping presets.")
            return

        print(f"📐 Evaluating presets: {', '.join(SEED_PRESETS)}")
        try:
            records = seed_preset_runs()
        except Exception as e:
            db.session.rollback()
            print(f"❌ Error storing presets: {e}")
            raise

        for record in records:
            value = record.summary[0]['value'] if record.summary else '?'
            print(f"✅ {record.config.get('preset')}: {value}")
        print(f"🎉 Stored {len(records)} runs")


if __name__ == "__main__":
    main()
