from datetime import datetime

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()


class RunRecord(db.Model):
    __tablename__ = 'runs'

    id = db.Column(db.Integer, primary_key=True)
    subcommand = db.Column(db.String(64), nullable=False, index=True)
    config = db.Column(db.JSON, nullable=False)
    summary = db.Column(db.JSON)
    seed = db.Column(db.Integer, default=0)
    version = db.Column(db.String(32))
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f'<RunRecord {self.id} {self.subcommand}>'

    def to_dict(self, with_summary=True):
        payload = {
            'id': self.id,
            'subcommand': self.subcommand,
            'config': self.config,
            'seed': self.seed,
            'version': self.version,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }
        if with_summary:
            payload['summary'] = self.summary
        return payload
